"""The whole pipeline through the command line, exactly as a user would run it.

Everything the library does is also reachable through the ``tcnad`` command:
train -> score -> threshold -> evaluate -> export-curves. This demo fabricates
a miniature channel dataset on disk, then drives each subcommand in turn via
``python3 -m tcnad.cli`` and shows the files that appear.

The on-disk layout it builds is the one every subcommand expects::

    dataset/
      train/C-1.csv            training matrix (header + float rows)
      test/C-1.csv             test matrix
      labeled_anomalies.csv    channel manifest with anomaly segments
"""

import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from tcnad.data import ManifestEntry, write_manifest, write_matrix_csv
from tcnad.evaluation import AnomalySegment


def run(*args):
    cmd = [sys.executable, "-m", "tcnad.cli", *args]
    print(f"\n$ tcnad {' '.join(args)}")
    proc = subprocess.run(cmd, capture_output=True, text=True)
    for line in (proc.stdout + proc.stderr).strip().splitlines():
        print(f"  {line}")
    if proc.returncode != 0:
        raise SystemExit(f"command failed with exit code {proc.returncode}")


with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    data = root / "dataset"
    run_dir = root / "run"

    # -----------------------------------------------------------------------
    # 1. fabricate one channel: sines in train, sines + a level shift in test
    # -----------------------------------------------------------------------
    rng = np.random.default_rng(9)

    def signal(n):
        t = np.arange(n)
        clean = np.stack(
            [np.sin(2 * np.pi * t / 25), np.cos(2 * np.pi * t / 18)], axis=1
        )
        return clean + 0.02 * rng.standard_normal((n, 2))

    train = signal(240)
    test = signal(160)
    test[100:121] += 1.0                       # the anomaly to find

    (data / "train").mkdir(parents=True)
    (data / "test").mkdir(parents=True)
    write_matrix_csv(data / "train" / "C-1.csv", train)
    write_matrix_csv(data / "test" / "C-1.csv", test)
    write_manifest(
        data / "labeled_anomalies.csv",
        [ManifestEntry("C-1", [AnomalySegment(100, 120)], "DEMO", 160)],
    )
    config = root / "demo.cfg"
    config.write_text(
        "window = 12\ntcn_channels = 8\ndilations = 1, 2\nmlp_layers = 1\n"
        "mlp_units = 8\ndropout = 0.0\nepochs = 3\nbatch_size = 64\n"
        "learning_rate = 0.01\nseed = 0\n"
    )
    print(f"dataset under {data}")

    # -----------------------------------------------------------------------
    # 2. train / score / threshold / evaluate / export
    # -----------------------------------------------------------------------
    run("train", "--data", str(data), "--channel", "C-1",
        "--out", str(run_dir), "--config", str(config), "--quiet")

    run("score", "--checkpoint", str(run_dir / "C-1.ckpt"),
        "--test", str(data / "test" / "C-1.csv"),
        "--out", str(run_dir / "C-1.csv"))

    run("threshold", "--scores", str(run_dir / "C-1.csv"), "--method", "grid",
        "--labels", str(data / "labeled_anomalies.csv"),
        "--out", str(run_dir / "threshold.json"))

    import json
    threshold = json.loads((run_dir / "threshold.json").read_text())["threshold"]

    run("evaluate", "--scores", str(run_dir / "C-1.csv"),
        "--labels", str(data / "labeled_anomalies.csv"),
        "--threshold", str(threshold), "--out", str(run_dir / "report.csv"))

    run("export-curves", "--scores", str(run_dir / "C-1.csv"),
        "--labels", str(data / "labeled_anomalies.csv"),
        "--threshold", str(threshold), "--out", str(run_dir / "curves.csv"))

    # -----------------------------------------------------------------------
    # 3. what ended up on disk
    # -----------------------------------------------------------------------
    print("\nartifacts:")
    for path in sorted(run_dir.iterdir()):
        print(f"  {path.name:16s} {path.stat().st_size:6d} bytes")
    print("\nreport.csv:")
    print((run_dir / "report.csv").read_text().strip())
