"""Gradient-step helpers shared by the trainers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """First/second moment accumulators and step counter for one parameter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_init(shape) -> AdamState:
    return AdamState(np.zeros(shape), np.zeros(shape))


def adam_step(state: AdamState, grad: np.ndarray, lr: float,
              beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> np.ndarray:
    """Advance the moment estimates and return the update to subtract.

    Standard bias-corrected moments: zero gradients leave parameters fixed,
    and the very first step with any nonzero gradient has magnitude close to
    ``lr`` per component.
    """
    grad = np.asarray(grad, dtype=np.float64)
    state.t += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1 ** state.t)
    v_hat = state.v / (1.0 - beta2 ** state.t)
    return lr * m_hat / (np.sqrt(v_hat) + eps)
