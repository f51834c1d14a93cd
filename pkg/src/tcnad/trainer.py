"""Sliding-window dataset construction and the Adam training loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Tensor, backward, rmse_loss
from .forecaster import ForecasterParams, forward
from .optim import AdamState, adam_step


class EmptyDatasetError(ValueError):
    """Raised when a series is too short to yield a single training window."""


class TrainingDivergedError(RuntimeError):
    """Raised when a batch produces a non-finite loss."""

    def __init__(self, epoch: int, batch_index: int, loss: float):
        super().__init__(
            f"non-finite loss {loss!r} at epoch {epoch}, batch {batch_index}"
        )
        self.epoch = epoch
        self.batch_index = batch_index


@dataclass
class WindowSample:
    """One training example: ``inputs`` (w, m) predicts ``target`` (m,).

    Both fields are views into the source series, not copies.
    """

    inputs: np.ndarray
    target: np.ndarray


def build_windows(series: np.ndarray, window: int) -> list[WindowSample]:
    """All length-w sliding windows of a (N, m) series, each paired with row w.

    A series of N rows yields N - w samples; windows never straddle series
    boundaries because each call sees exactly one series.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 2:
        raise ValueError(f"expected a (N, m) series, got shape {series.shape}")
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    n = series.shape[0]
    if n <= window:
        raise EmptyDatasetError(
            f"series of length {n} yields no samples for window {window}"
        )
    return [
        WindowSample(inputs=series[i : i + window], target=series[i + window])
        for i in range(n - window)
    ]


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 1e-3
    seed: int = 0
    shuffle: bool = True
    val_fraction: float = 0.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError(f"val_fraction must be in [0, 1), got {self.val_fraction}")


@dataclass
class TrainResult:
    params: ForecasterParams
    loss_history: list[float] = field(default_factory=list)
    val_history: list[float] = field(default_factory=list)


def evaluate_loss(params: ForecasterParams, samples: list[WindowSample]) -> float:
    """Mean per-sample RMSE without touching any tape or dropout."""
    if not samples:
        raise ValueError("evaluate_loss needs at least one sample")
    total = 0.0
    for s in samples:
        loss = rmse_loss(forward(Tensor(s.inputs), params), Tensor(s.target))
        total += float(loss.values)
    return total / len(samples)


def train(
    params: ForecasterParams,
    samples: list[WindowSample],
    config: TrainConfig,
    progress=None,
) -> TrainResult:
    """Minibatch Adam on the window samples, mutating ``params`` in place.

    Gradients are accumulated one sample at a time on a per-sample tape, then
    scaled by 1/batch. The epoch loss recorded in ``loss_history`` is the mean
    per-sample training RMSE seen during that epoch; when ``val_fraction`` > 0
    the chronological tail is held out and scored after every epoch.

    Per-run randomness (shuffling, dropout masks) comes from two generators
    spawned off ``config.seed``, so identical inputs give identical results.
    ``progress``, if given, is called as ``progress(epoch, train_loss)``.
    """
    if not samples:
        raise EmptyDatasetError("no training samples")
    n_val = int(round(len(samples) * config.val_fraction))
    if n_val > 0:
        fit_samples, val_samples = samples[:-n_val], samples[-n_val:]
    else:
        fit_samples, val_samples = samples, []
    if not fit_samples:
        raise EmptyDatasetError("val_fraction leaves no training samples")

    shuffle_seq, dropout_seq = np.random.SeedSequence(config.seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    dropout_rng = np.random.default_rng(dropout_seq)

    tensors = params.tensors()
    adam = AdamState(learning_rate=config.learning_rate)
    result = TrainResult(params=params)

    n = len(fit_samples)
    for epoch in range(config.epochs):
        order = np.arange(n)
        if config.shuffle:
            shuffle_rng.shuffle(order)
        epoch_total = 0.0
        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            for t in tensors:
                t.zero_grad()
            batch_total = 0.0
            for i in idx:
                s = fit_samples[i]
                with Tape():
                    pred = forward(Tensor(s.inputs), params, training=True, rng=dropout_rng)
                    loss = rmse_loss(pred, Tensor(s.target))
                    backward(loss)
                batch_total += float(loss.values)
            if not np.isfinite(batch_total):
                raise TrainingDivergedError(epoch, batch_index, batch_total)
            scale = 1.0 / idx.size
            for t in tensors:
                if t.grad is not None:
                    t.grad *= scale
            adam_step(tensors, adam)
            epoch_total += batch_total
        result.loss_history.append(epoch_total / n)
        if val_samples:
            result.val_history.append(evaluate_loss(params, val_samples))
        if progress is not None:
            progress(epoch, result.loss_history[-1])
    return result
