"""File formats, normalization, and dataset loading.

Formats understood here:

* matrices -- CSV with a header row, or a small binary container (16-byte
  header ``TMX1`` + uint32 rows + uint32 cols + 4 reserved bytes, then
  row-major little-endian float64). ``read_matrix`` sniffs which one it got.
* manifest -- ``chan_id,spacecraft,anomaly_sequences,num_values`` CSV where
  anomaly_sequences is a bracketed list of [start, end] pairs (the layout of
  the public spacecraft datasets; extra columns are ignored).
* config -- flat ``key = value`` lines, ``#`` comments; unknown keys are an
  error, never silently dropped.
* small CSVs for scores, labels, losses, reports and score/threshold curves.

Normalization is min-max with statistics from the training split only.
"""

from __future__ import annotations

import ast
import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evaluation import AnomalySegment, EvalReport
from .forecaster import ModelConfig
from .thresholds import ScoreSequence
from .trainer import TrainConfig

MATRIX_MAGIC = b"TMX1"


class DataFormatError(Exception):
    """A file does not match the format it is supposed to have."""


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

@dataclass
class NormalizationStats:
    """Min/max from the training split; per-feature vectors or global scalars."""

    minimum: np.ndarray
    maximum: np.ndarray
    mode: str = "per_feature"

    def __post_init__(self):
        if self.mode not in ("per_feature", "global"):
            raise ValueError(f"unknown normalization mode {self.mode!r}")
        self.minimum = np.asarray(self.minimum, dtype=np.float64)
        self.maximum = np.asarray(self.maximum, dtype=np.float64)
        if self.minimum.shape != self.maximum.shape:
            raise ValueError("min/max shape mismatch")


def compute_stats(train: np.ndarray, mode: str = "per_feature") -> NormalizationStats:
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.size == 0:
        raise ValueError(f"expected a non-empty (N, m) matrix, got shape {train.shape}")
    if mode == "per_feature":
        mn, mx = train.min(axis=0), train.max(axis=0)
        flat = np.flatnonzero(mx == mn)
        if flat.size:
            warnings.warn(
                f"features {flat.tolist()} are constant in the training split; "
                "they normalize to 0",
                RuntimeWarning,
                stacklevel=2,
            )
    elif mode == "global":
        mn = np.array([train.min()])
        mx = np.array([train.max()])
        if mn[0] == mx[0]:
            warnings.warn(
                "training split is globally constant; everything normalizes to 0",
                RuntimeWarning,
                stacklevel=2,
            )
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    return NormalizationStats(minimum=mn, maximum=mx, mode=mode)


def normalize(x: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    """(x - min) / (max - min); features with zero range map to 0."""
    x = np.asarray(x, dtype=np.float64)
    span = stats.maximum - stats.minimum
    safe = np.where(span == 0, 1.0, span)
    out = (x - stats.minimum) / safe
    return np.where(span == 0, 0.0, out)


# ---------------------------------------------------------------------------
# matrix files
# ---------------------------------------------------------------------------

def write_matrix_csv(path, x: np.ndarray, feature_names: list[str] | None = None):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    names = feature_names or [f"f{i}" for i in range(x.shape[1])]
    if len(names) != x.shape[1]:
        raise ValueError("feature_names length mismatch")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in x:
            writer.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path) -> np.ndarray:
    rows: list[list[float]] = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {width} columns, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def write_matrix_binary(path, x: np.ndarray):
    x = np.atleast_2d(np.ascontiguousarray(x, dtype="<f8"))
    header = MATRIX_MAGIC + np.array(x.shape, dtype="<u4").tobytes() + b"\x00" * 4
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(x.tobytes())


def read_matrix_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) < 16 or header[:4] != MATRIX_MAGIC:
            raise DataFormatError(f"{path}: missing {MATRIX_MAGIC!r} header")
        rows, cols = np.frombuffer(header[4:12], dtype="<u4")
        payload = fh.read()
    expected = int(rows) * int(cols) * 8
    if len(payload) != expected:
        raise DataFormatError(
            f"{path}: payload is {len(payload)} bytes, header promises {expected}"
        )
    return (
        np.frombuffer(payload, dtype="<f8")
        .reshape(int(rows), int(cols))
        .astype(np.float64)
    )


def read_matrix(path) -> np.ndarray:
    """Sniff binary vs CSV by the magic bytes, then delegate."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == MATRIX_MAGIC:
        return read_matrix_binary(path)
    return read_matrix_csv(path)


# ---------------------------------------------------------------------------
# manifest + channel loading
# ---------------------------------------------------------------------------

@dataclass
class ManifestEntry:
    channel: str
    segments: list[AnomalySegment]
    spacecraft: str = ""
    num_values: int | None = None


@dataclass
class ChannelDataset:
    channel: str
    train: np.ndarray
    test: np.ndarray
    segments: list[AnomalySegment] = field(default_factory=list)


def read_manifest(path) -> dict[str, ManifestEntry]:
    entries: dict[str, ManifestEntry] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        for required in ("chan_id", "anomaly_sequences"):
            if required not in fields:
                raise DataFormatError(f"{path}: manifest lacks a {required!r} column")
        for lineno, row in enumerate(reader, start=2):
            chan = (row.get("chan_id") or "").strip()
            if not chan:
                raise DataFormatError(f"{path}:{lineno}: empty chan_id")
            try:
                seqs = ast.literal_eval(row["anomaly_sequences"])
                segments = [AnomalySegment(int(s), int(e)) for s, e in seqs]
            except (ValueError, SyntaxError, TypeError) as exc:
                raise DataFormatError(
                    f"{path}:{lineno}: bad anomaly_sequences ({exc})"
                ) from None
            raw_nv = (row.get("num_values") or "").strip()
            num_values = int(raw_nv) if raw_nv else None
            entries[chan] = ManifestEntry(
                channel=chan,
                segments=segments,
                spacecraft=(row.get("spacecraft") or "").strip(),
                num_values=num_values,
            )
    if not entries:
        raise DataFormatError(f"{path}: manifest has no rows")
    return entries


def write_manifest(path, entries: list[ManifestEntry]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chan_id", "spacecraft", "anomaly_sequences", "num_values"])
        for e in entries:
            seqs = str([[s.start, s.end] for s in e.segments])
            writer.writerow([e.channel, e.spacecraft, seqs, e.num_values or ""])


def _find_matrix(directory: Path, channel: str) -> Path:
    for suffix in (".csv", ".bin"):
        candidate = directory / f"{channel}{suffix}"
        if candidate.exists():
            return candidate
    raise DataFormatError(f"no {channel}.csv or {channel}.bin under {directory}")


def load_channel(data_dir, channel: str) -> ChannelDataset:
    """Load train/test matrices and label segments for one channel.

    Expects ``<data_dir>/train/<ch>.csv|.bin``, ``<data_dir>/test/...`` and
    ``<data_dir>/labeled_anomalies.csv``.
    """
    data_dir = Path(data_dir)
    manifest = read_manifest(data_dir / "labeled_anomalies.csv")
    if channel not in manifest:
        raise DataFormatError(f"channel {channel!r} not in {data_dir / 'labeled_anomalies.csv'}")
    entry = manifest[channel]
    train = read_matrix(_find_matrix(data_dir / "train", channel))
    test = read_matrix(_find_matrix(data_dir / "test", channel))
    for name, mat in (("train", train), ("test", test)):
        if not np.all(np.isfinite(mat)):
            raise DataFormatError(f"{channel} {name} matrix contains non-finite values")
    if train.shape[1] != test.shape[1]:
        raise DataFormatError(
            f"{channel}: train has {train.shape[1]} features, test has {test.shape[1]}"
        )
    if entry.num_values is not None and entry.num_values != test.shape[0]:
        raise DataFormatError(
            f"{channel}: manifest num_values={entry.num_values} but test has "
            f"{test.shape[0]} rows"
        )
    for seg in entry.segments:
        if seg.end >= test.shape[0]:
            raise DataFormatError(
                f"{channel}: segment [{seg.start}, {seg.end}] exceeds test length "
                f"{test.shape[0]}"
            )
    return ChannelDataset(
        channel=channel, train=train, test=test, segments=entry.segments
    )


def list_channels(data_dir) -> list[str]:
    manifest = read_manifest(Path(data_dir) / "labeled_anomalies.csv")
    return sorted(manifest)


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

_MODEL_FIELDS = {
    "window": int, "conv_kernel": int, "tcn_kernel": int, "tcn_channels": int,
    "dilations": "dilations", "mlp_layers": int, "mlp_units": int,
    "dropout": float, "attention_mode": str, "attention_activation": str,
    "temporal_attention": "bool", "variable_attention": "bool",
}
_TRAIN_FIELDS = {
    "epochs": int, "batch_size": int, "learning_rate": float,
    "seed": int, "shuffle": "bool", "val_fraction": float,
}
_FIXED_FIELDS = {"optimizer": "adam", "loss": "rmse"}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_value(kind, raw: str, where: str):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if kind == "bool":
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "dilations":
            return tuple(int(part) for part in raw.replace(" ", "").split(","))
    except ValueError as exc:
        raise DataFormatError(f"{where}: {exc}") from None
    raise AssertionError(kind)


def parse_config_file(path) -> tuple[ModelConfig, TrainConfig]:
    """Flat key=value config; unknown keys and malformed values are errors."""
    model_kwargs: dict = {}
    train_kwargs: dict = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise DataFormatError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in text.split("=", 1))
            where = f"{path}:{lineno}"
            if key in model_kwargs or key in train_kwargs:
                raise DataFormatError(f"{where}: duplicate key {key!r}")
            if key in _MODEL_FIELDS:
                model_kwargs[key] = _parse_value(_MODEL_FIELDS[key], raw, where)
            elif key in _TRAIN_FIELDS:
                train_kwargs[key] = _parse_value(_TRAIN_FIELDS[key], raw, where)
            elif key in _FIXED_FIELDS:
                if raw.lower() != _FIXED_FIELDS[key]:
                    raise DataFormatError(
                        f"{where}: only {key} = {_FIXED_FIELDS[key]} is supported, "
                        f"got {raw!r}"
                    )
            else:
                raise DataFormatError(f"{where}: unknown key {key!r}")
    try:
        return ModelConfig(**model_kwargs), TrainConfig(**train_kwargs)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# small CSVs
# ---------------------------------------------------------------------------

def write_scores_csv(path, seq: ScoreSequence):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestep", "score"])
        for t, s in zip(seq.timesteps, seq.scores):
            writer.writerow([int(t), repr(float(s))])


def read_scores_csv(path) -> ScoreSequence:
    timesteps: list[int] = []
    scores: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["timestep", "score"]:
            raise DataFormatError(f"{path}: expected a 'timestep,score' header")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                timesteps.append(int(row[0]))
                scores.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    if not scores:
        raise DataFormatError(f"{path}: no score rows")
    ts = np.asarray(timesteps)
    if not np.array_equal(ts, np.arange(ts[0], ts[0] + ts.size)):
        raise DataFormatError(f"{path}: timesteps must be contiguous and ascending")
    return ScoreSequence(scores=np.asarray(scores), first_timestep=int(ts[0]))


def write_labels_csv(path, labels: np.ndarray, first_timestep: int = 0):
    labels = np.asarray(labels)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestep", "label"])
        for i, v in enumerate(labels):
            writer.writerow([first_timestep + i, int(v)])


def read_labels_csv(path) -> tuple[np.ndarray, int]:
    """Aligned labels file -> (labels, first_timestep)."""
    timesteps: list[int] = []
    labels: list[int] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["timestep", "label"]:
            raise DataFormatError(f"{path}: expected a 'timestep,label' header")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                timesteps.append(int(row[0]))
                labels.append(int(row[1]))
            except (ValueError, IndexError) as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    if not labels:
        raise DataFormatError(f"{path}: no label rows")
    ts = np.asarray(timesteps)
    if not np.array_equal(ts, np.arange(ts[0], ts[0] + ts.size)):
        raise DataFormatError(f"{path}: timesteps must be contiguous and ascending")
    arr = np.asarray(labels)
    if not np.isin(arr, (0, 1)).all():
        raise DataFormatError(f"{path}: labels must be 0/1")
    return arr, int(ts[0])


def write_loss_csv(path, history: list[float]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for epoch, loss in enumerate(history):
            writer.writerow([epoch, repr(float(loss))])


def write_report_csv(path, reports: list[EvalReport]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "tp", "fp", "fn", "precision", "recall", "f1"])
        for r in reports:
            writer.writerow(
                [r.channel, r.tp, r.fp, r.fn,
                 repr(float(r.precision)), repr(float(r.recall)), repr(float(r.f1))]
            )


def write_curve_csv(path, seq: ScoreSequence, threshold: float,
                    labels: np.ndarray, predictions: np.ndarray):
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)
    if labels.size != seq.scores.size or predictions.size != seq.scores.size:
        raise ValueError("labels/predictions must align with the score sequence")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestep", "score", "threshold", "label", "prediction"])
        for t, s, l, p in zip(seq.timesteps, seq.scores, labels, predictions):
            writer.writerow([int(t), repr(float(s)), repr(float(threshold)), int(l), int(p)])
