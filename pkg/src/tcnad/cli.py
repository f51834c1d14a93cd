"""Command line entry points.

Subcommands: train, score, threshold, evaluate, sweep-window, export-curves.
Exit codes: 0 success, 1 usage problem, 2 data/format problem, 3 numerical
failure (diverged training, impossible tail fit).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .data import (
    DataFormatError,
    compute_stats,
    list_channels,
    load_channel,
    normalize,
    parse_config_file,
    read_labels_csv,
    read_manifest,
    read_matrix,
    read_scores_csv,
    write_curve_csv,
    write_loss_csv,
    write_report_csv,
    write_scores_csv,
)
from .evaluation import (
    aggregate,
    labels_from_segments,
    point_adjusted_report,
)
from .forecaster import ModelConfig, init_forecaster, load_checkpoint, save_checkpoint
from .thresholds import (
    GpdFitError,
    ScoreSequence,
    anomaly_scores,
    apply_threshold,
    best_f1_threshold,
    epsilon_threshold,
    pot_threshold,
)
from .trainer import (
    EmptyDatasetError,
    TrainConfig,
    TrainingDivergedError,
    build_windows,
    train,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    """Arguments are well-formed but semantically wrong together."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; our contract reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="tcnad",
        description="Telemetry anomaly detection: train a window forecaster, "
        "score residuals, pick a threshold, evaluate with point adjustment.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one forecaster per channel")
    p.add_argument("--data", required=True, help="dataset dir with train/, test/, labeled_anomalies.csv")
    p.add_argument("--channel", action="append", required=True,
                   help="channel id (repeatable); 'all' selects every manifest channel")
    p.add_argument("--out", required=True, help="output dir for checkpoints and loss curves")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--epochs", type=int, help="override the config epoch count")
    p.add_argument("--window", type=int, help="override the config window length")
    p.add_argument("--global-minmax", action="store_true",
                   help="normalize with one global min/max instead of per-feature")
    p.add_argument("--quiet", action="store_true", help="suppress per-epoch progress")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a test series with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True, help="test matrix (.csv or .bin)")
    p.add_argument("--out", required=True, help="output scores CSV")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("threshold", help="select a threshold for a score sequence")
    p.add_argument("--scores", required=True, help="scores CSV from 'score'")
    p.add_argument("--method", required=True, choices=("grid", "epsilon", "pot"))
    p.add_argument("--labels", help="labels CSV or manifest (required for grid)")
    p.add_argument("--channel", help="channel id for manifest labels (default: scores file stem)")
    p.add_argument("--q", type=float, default=1e-3, help="tail risk for pot (default 1e-3)")
    p.add_argument("--init-quantile", type=float, default=0.98,
                   help="initial quantile for pot (default 0.98)")
    p.add_argument("--min-exceedances", type=int, default=32,
                   help="minimum tail points for pot (default 32)")
    p.add_argument("--out", help="optional JSON result file")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("evaluate", help="point-adjusted precision/recall/F1")
    p.add_argument("--scores", nargs="+", required=True, help="one or more score CSVs")
    p.add_argument("--labels", required=True, help="labels CSV or manifest")
    p.add_argument("--threshold", nargs="+", required=True, type=float,
                   help="one threshold per scores file, or a single shared one")
    p.add_argument("--channel", action="append",
                   help="channel ids matching --scores (default: file stems)")
    p.add_argument("--macro", action="store_true",
                   help="macro-average across channels instead of micro")
    p.add_argument("--out", help="optional report CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-window", help="train/evaluate across window lengths")
    p.add_argument("--data", required=True)
    p.add_argument("--channel", action="append", required=True)
    p.add_argument("--windows", required=True, help="comma list, e.g. 20,40,60,80,100")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--global-minmax", action="store_true")
    p.add_argument("--out", help="optional CSV of window,precision,recall,f1")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-curves", help="per-timestep score/threshold/label/prediction CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--threshold", required=True, type=float)
    p.add_argument("--channel")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _load_configs(args) -> tuple[ModelConfig, TrainConfig]:
    if getattr(args, "config", None):
        model_cfg, train_cfg = parse_config_file(args.config)
    else:
        model_cfg, train_cfg = ModelConfig(), TrainConfig()
    if getattr(args, "window", None) is not None:
        model_cfg = replace(model_cfg, window=args.window)
    if getattr(args, "epochs", None) is not None:
        train_cfg = replace(train_cfg, epochs=args.epochs)
    if getattr(args, "seed", None) is not None:
        train_cfg = replace(train_cfg, seed=args.seed)
    return model_cfg, train_cfg


def _resolve_channels(data_dir, requested: list[str]) -> list[str]:
    if any(ch == "all" for ch in requested):
        return list_channels(data_dir)
    return list(dict.fromkeys(requested))


def _is_manifest(path) -> bool:
    with open(path, newline="") as fh:
        first = fh.readline()
    return "chan_id" in first.split(",")[0:4] or first.startswith("chan_id")


def _aligned_labels(labels_path, seq: ScoreSequence, channel: str | None,
                    fallback_channel: str) -> np.ndarray:
    """Labels for exactly the scored timesteps, from either supported format."""
    lo, n = seq.first_timestep, seq.scores.size
    if _is_manifest(labels_path):
        manifest = read_manifest(labels_path)
        ch = channel or fallback_channel
        if ch not in manifest:
            raise DataFormatError(f"channel {ch!r} not found in {labels_path}")
        entry = manifest[ch]
        length = entry.num_values if entry.num_values is not None else lo + n
        if length < lo + n:
            raise DataFormatError(
                f"{labels_path}: channel {ch!r} covers {length} steps but the "
                f"scores reach timestep {lo + n - 1}"
            )
        try:
            full = labels_from_segments(entry.segments, length)
        except ValueError as exc:
            raise DataFormatError(f"{labels_path}: {exc}") from None
        return full[lo : lo + n]
    labels, first = read_labels_csv(labels_path)
    offset = lo - first
    if offset < 0 or offset + n > labels.size:
        raise DataFormatError(
            f"{labels_path}: labels cover timesteps {first}..{first + labels.size - 1} "
            f"but scores need {lo}..{lo + n - 1}"
        )
    return labels[offset : offset + n]


def _train_one_channel(data_dir, channel, model_cfg, train_cfg, norm_mode, quiet):
    ds = load_channel(data_dir, channel)
    stats = compute_stats(ds.train, norm_mode)
    train_norm = normalize(ds.train, stats)
    samples = build_windows(train_norm, model_cfg.window)
    params = init_forecaster(ds.train.shape[1], model_cfg, seed=train_cfg.seed)

    progress = None
    if not quiet:
        def progress(epoch, loss, _ch=channel, _total=train_cfg.epochs):
            print(f"[{_ch}] epoch {epoch + 1}/{_total} loss={loss:.6f}")

    result = train(params, samples, train_cfg, progress=progress)
    return ds, stats, params, result


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    model_cfg, train_cfg = _load_configs(args)
    norm_mode = "global" if args.global_minmax else "per_feature"
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for channel in _resolve_channels(args.data, args.channel):
        _, stats, params, result = _train_one_channel(
            args.data, channel, model_cfg, train_cfg, norm_mode, args.quiet
        )
        ckpt = out_dir / f"{channel}.ckpt"
        save_checkpoint(ckpt, params, stats)
        write_loss_csv(out_dir / f"{channel}.loss.csv", result.loss_history)
        final = result.loss_history[-1] if result.loss_history else float("nan")
        print(f"{channel}: {len(result.loss_history)} epochs, final loss {final:.6f}, saved {ckpt}")
    return EXIT_OK


def cmd_score(args) -> int:
    params, stats = load_checkpoint(args.checkpoint)
    test = read_matrix(args.test)
    if not np.all(np.isfinite(test)):
        raise DataFormatError(f"{args.test}: matrix contains non-finite values")
    series = normalize(test, stats) if stats is not None else test
    seq = anomaly_scores(params, series)
    write_scores_csv(args.out, seq)
    print(
        f"wrote {seq.scores.size} scores for timesteps "
        f"{seq.first_timestep}..{seq.first_timestep + seq.scores.size - 1} to {args.out}"
    )
    return EXIT_OK


def cmd_threshold(args) -> int:
    seq = read_scores_csv(args.scores)
    if args.method == "grid":
        if not args.labels:
            raise UsageError("--method grid needs --labels")
        labels = _aligned_labels(
            args.labels, seq, args.channel, Path(args.scores).stem
        )
        result = best_f1_threshold(seq.scores, labels)
    elif args.method == "epsilon":
        result = epsilon_threshold(seq.scores)
    else:
        result = pot_threshold(
            seq.scores, q=args.q, init_quantile=args.init_quantile,
            min_exceedances=args.min_exceedances,
        )
    print(f"method={result.method}")
    print(f"threshold={result.threshold!r}")
    for key in sorted(result.diagnostics):
        print(f"{key}={result.diagnostics[key]}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(
                {"method": result.method, "threshold": result.threshold,
                 "diagnostics": result.diagnostics},
                fh, indent=2, sort_keys=True, default=float,
            )
            fh.write("\n")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    n = len(args.scores)
    thresholds = args.threshold
    if len(thresholds) == 1:
        thresholds = thresholds * n
    if len(thresholds) != n:
        raise UsageError(
            f"got {len(args.threshold)} thresholds for {n} score files; "
            "pass one per file or a single shared threshold"
        )
    channels = args.channel or [Path(p).stem for p in args.scores]
    if len(channels) != n:
        raise UsageError(f"got {len(channels)} channels for {n} score files")

    reports = []
    for path, th, ch in zip(args.scores, thresholds, channels):
        seq = read_scores_csv(path)
        labels = _aligned_labels(args.labels, seq, ch, Path(path).stem)
        preds = apply_threshold(seq.scores, th)
        reports.append(point_adjusted_report(preds, labels, channel=ch))
    summary = aggregate(reports, "macro" if args.macro else "micro")

    for r in reports + [summary]:
        print(
            f"{r.channel}: precision={r.precision:.4f} recall={r.recall:.4f} "
            f"f1={r.f1:.4f} tp={r.tp} fp={r.fp} fn={r.fn}"
        )
    if args.out:
        write_report_csv(args.out, reports + [summary])
    return EXIT_OK


def cmd_sweep(args) -> int:
    model_cfg, train_cfg = _load_configs(args)
    try:
        windows = [int(w) for w in args.windows.replace(" ", "").split(",") if w]
    except ValueError:
        raise UsageError(f"--windows must be a comma list of ints, got {args.windows!r}")
    if not windows:
        raise UsageError("--windows is empty")
    channels = _resolve_channels(args.data, args.channel)
    norm_mode = "global" if args.global_minmax else "per_feature"

    rows = []
    for w in windows:
        cfg_w = replace(model_cfg, window=w)
        reports = []
        for channel in channels:
            ds, stats, params, _ = _train_one_channel(
                args.data, channel, cfg_w, train_cfg, norm_mode, args.quiet
            )
            test_norm = normalize(ds.test, stats)
            seq = anomaly_scores(params, test_norm)
            labels = labels_from_segments(ds.segments, ds.test.shape[0])[w:]
            th = best_f1_threshold(seq.scores, labels)
            preds = apply_threshold(seq.scores, th.threshold)
            reports.append(point_adjusted_report(preds, labels, channel=channel))
        agg = aggregate(reports, "micro")
        rows.append((w, agg.precision, agg.recall, agg.f1))
        print(f"window={w} precision={agg.precision:.4f} recall={agg.recall:.4f} f1={agg.f1:.4f}")
    if args.out:
        import csv as _csv

        with open(args.out, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["window", "precision", "recall", "f1"])
            for w, p, r, f1 in rows:
                writer.writerow([w, repr(p), repr(r), repr(f1)])
    return EXIT_OK


def cmd_export(args) -> int:
    seq = read_scores_csv(args.scores)
    labels = _aligned_labels(args.labels, seq, args.channel, Path(args.scores).stem)
    preds = apply_threshold(seq.scores, args.threshold)
    write_curve_csv(args.out, seq, args.threshold, labels, preds)
    print(f"wrote {seq.scores.size} rows to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # raised by --help (0) and usage errors (1)
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tcnad {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, EmptyDatasetError, FileNotFoundError, OSError) as exc:
        print(f"tcnad {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDivergedError, GpdFitError) as exc:
        print(f"tcnad {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"tcnad {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
