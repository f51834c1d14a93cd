#!/usr/bin/env python3
"""Full-scale run against the public SMAP / MSL spacecraft telemetry archive.

This is the extended reproduction, deliberately kept out of the test suite:
training one forecaster per channel (55 SMAP channels, 27 MSL channels) takes
hours, and run-to-run numbers move with training stochasticity and evaluation
choices. Reference results for this family of detectors on these datasets are

    SMAP: precision 0.9539  recall 0.9019  F1 0.9272
    MSL:  precision 0.9419  recall 0.9815  F1 0.9613

and we treat a run whose micro-averaged F1 lands within +-0.05 of the
reference F1 as a successful reproduction. The script prints a per-channel
table, writes a report CSV, and states the verdict per spacecraft.

Expected raw layout (the archive's own layout)::

    <raw>/train/<chan>.npy            float array, shape (n_train, 25)
    <raw>/test/<chan>.npy             float array, shape (n_test, 25)
    <raw>/labeled_anomalies.csv       chan_id,spacecraft,anomaly_sequences,...

Usage::

    python3 scripts/reproduce_nasa.py --raw /path/to/archive --work runs/nasa
    python3 scripts/reproduce_nasa.py --raw ... --work ... --spacecraft MSL \
        --epochs 10 --limit 3        # quick smoke run on three channels
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from tcnad.data import (
    compute_stats,
    load_channel,
    normalize,
    read_manifest,
    write_manifest,
    write_matrix_binary,
    write_report_csv,
    write_scores_csv,
)
from tcnad.evaluation import aggregate, labels_from_segments, point_adjusted_report
from tcnad.forecaster import ModelConfig, init_forecaster, load_checkpoint, save_checkpoint
from tcnad.thresholds import anomaly_scores, apply_threshold, best_f1_threshold
from tcnad.trainer import TrainConfig, build_windows, train

REFERENCE = {
    "SMAP": {"precision": 0.9539, "recall": 0.9019, "f1": 0.9272},
    "MSL": {"precision": 0.9419, "recall": 0.9815, "f1": 0.9613},
}
TOLERANCE = 0.05


def convert_archive(raw: Path, dataset: Path, spacecrafts: list[str], limit: int | None):
    """Convert .npy channel files into this package's binary matrix format."""
    manifest = read_manifest(raw / "labeled_anomalies.csv")
    picked = [
        e for e in manifest.values()
        if not spacecrafts or e.spacecraft in spacecrafts
    ]
    picked.sort(key=lambda e: e.channel)
    if limit:
        picked = picked[:limit]
    if not picked:
        raise SystemExit(f"no channels for spacecraft {spacecrafts} in {raw}")

    (dataset / "train").mkdir(parents=True, exist_ok=True)
    (dataset / "test").mkdir(parents=True, exist_ok=True)
    for entry in picked:
        for split in ("train", "test"):
            src = raw / split / f"{entry.channel}.npy"
            dst = dataset / split / f"{entry.channel}.bin"
            if dst.exists():
                continue
            write_matrix_binary(dst, np.load(src).astype(np.float64))
    write_manifest(dataset / "labeled_anomalies.csv", picked)
    return picked


def run_channel(dataset: Path, work: Path, channel: str, model_cfg: ModelConfig,
                train_cfg: TrainConfig, resume: bool, quiet: bool):
    """Train, score, and pick the per-channel grid threshold; returns a report."""
    ds = load_channel(dataset, channel)
    ckpt_path = work / "checkpoints" / f"{channel}.ckpt"
    scores_path = work / "scores" / f"{channel}.csv"
    ckpt_path.parent.mkdir(parents=True, exist_ok=True)
    scores_path.parent.mkdir(parents=True, exist_ok=True)

    if resume and ckpt_path.exists():
        params, stats = load_checkpoint(ckpt_path)
    else:
        stats = compute_stats(ds.train)
        samples = build_windows(normalize(ds.train, stats), model_cfg.window)
        params = init_forecaster(ds.train.shape[1], model_cfg, seed=train_cfg.seed)
        progress = None
        if not quiet:
            def progress(epoch, loss):
                print(f"    epoch {epoch + 1}/{train_cfg.epochs} loss={loss:.5f}",
                      flush=True)
        train(params, samples, train_cfg, progress=progress)
        save_checkpoint(ckpt_path, params, stats)

    seq = anomaly_scores(params, normalize(ds.test, stats))
    write_scores_csv(scores_path, seq)
    labels = labels_from_segments(ds.segments, ds.test.shape[0])
    labels = labels[seq.first_timestep : seq.first_timestep + seq.scores.size]
    chosen = best_f1_threshold(seq.scores, labels)
    preds = apply_threshold(seq.scores, chosen.threshold)
    return point_adjusted_report(preds, labels, channel=channel)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--raw", required=True, type=Path,
                        help="archive dir with train/, test/, labeled_anomalies.csv")
    parser.add_argument("--work", required=True, type=Path,
                        help="working dir for converted data, checkpoints, scores")
    parser.add_argument("--spacecraft", choices=("SMAP", "MSL", "both"),
                        default="both")
    parser.add_argument("--window", type=int, default=100)
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--batch-size", type=int, default=256)
    parser.add_argument("--learning-rate", type=float, default=1e-3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--limit", type=int,
                        help="only the first N channels per run (smoke testing)")
    parser.add_argument("--resume", action="store_true",
                        help="reuse existing checkpoints instead of retraining")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    spacecrafts = ["SMAP", "MSL"] if args.spacecraft == "both" else [args.spacecraft]
    dataset = args.work / "dataset"
    entries = convert_archive(args.raw, dataset, spacecrafts, args.limit)

    model_cfg = ModelConfig(window=args.window)
    train_cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                            learning_rate=args.learning_rate, seed=args.seed)

    by_craft: dict[str, list] = {s: [] for s in spacecrafts}
    started = time.time()
    for i, entry in enumerate(entries, start=1):
        print(f"[{i}/{len(entries)}] {entry.spacecraft} {entry.channel} "
              f"(elapsed {time.time() - started:.0f}s)", flush=True)
        report = run_channel(dataset, args.work, entry.channel, model_cfg,
                             train_cfg, args.resume, args.quiet)
        by_craft[entry.spacecraft].append(report)
        print(f"    precision={report.precision:.4f} recall={report.recall:.4f} "
              f"f1={report.f1:.4f}", flush=True)

    print()
    print(f"{'channel':12s} {'tp':>5s} {'fp':>5s} {'fn':>5s} "
          f"{'precision':>9s} {'recall':>9s} {'f1':>9s}")
    all_reports = []
    ok = True
    for craft in spacecrafts:
        reports = by_craft[craft]
        if not reports:
            continue
        for r in reports:
            print(f"{r.channel:12s} {r.tp:5d} {r.fp:5d} {r.fn:5d} "
                  f"{r.precision:9.4f} {r.recall:9.4f} {r.f1:9.4f}")
        summary = replace(aggregate(reports, "micro"), channel=f"{craft}(micro)")
        all_reports.extend(reports + [summary])
        ref = REFERENCE[craft]
        delta = summary.f1 - ref["f1"]
        verdict = "REPRODUCED" if abs(delta) <= TOLERANCE else "OUT OF BAND"
        print(f"{summary.channel:12s} {summary.tp:5d} {summary.fp:5d} {summary.fn:5d} "
              f"{summary.precision:9.4f} {summary.recall:9.4f} {summary.f1:9.4f}")
        print(f"  {craft}: reference f1={ref['f1']:.4f}, this run {summary.f1:.4f} "
              f"(delta {delta:+.4f}) -> {verdict}")
        if args.limit is None and abs(delta) > TOLERANCE:
            ok = False

    report_path = args.work / "report.csv"
    write_report_csv(report_path, all_reports)
    print(f"\nwrote {report_path}")
    if args.limit is not None:
        print("note: --limit was set; the verdict only applies to full runs")
        return 0
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
