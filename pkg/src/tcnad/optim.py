"""Adam optimizer operating on lists of autodiff tensors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor


@dataclass
class AdamState:
    """First/second moment estimates plus the step counter.

    Moments are keyed by position in the parameter list, so the same list (in
    the same order) must be passed to every ``adam_step`` call.
    """

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def _ensure(self, params: list[Tensor]):
        if not self.m:
            self.m = [np.zeros_like(p.values) for p in params]
            self.v = [np.zeros_like(p.values) for p in params]
        elif len(self.m) != len(params):
            raise ValueError(
                f"AdamState tracks {len(self.m)} tensors, got {len(params)}"
            )


def adam_step(params: list[Tensor], state: AdamState):
    """One Adam update in place. Tensors with ``grad is None`` are skipped.

    Classic bias-corrected form, epsilon added outside the square root:

        p -= lr * m_hat / (sqrt(v_hat) + eps)
    """
    state._ensure(params)
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for i, p in enumerate(params):
        if p.grad is None:
            continue
        g = p.grad
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p.values -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
