"""Adam optimizer in functional form, shared by the attack loop and training."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import InvalidInputError


@dataclass(frozen=True)
class AdamState:
    """Moment estimates and hyperparameters for one optimized vector."""

    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = None
    u: np.ndarray | None = None


def adam_update(state: AdamState, grad: np.ndarray) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam step; returns (delta, new state).

    delta = -lr * m_hat / (sqrt(u_hat) + eps), to be added to the iterate.
    """
    g = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise InvalidInputError("gradient contains non-finite values")
    m = np.zeros_like(g) if state.m is None else state.m
    u = np.zeros_like(g) if state.u is None else state.u
    t = state.t + 1
    m = state.beta1 * m + (1.0 - state.beta1) * g
    u = state.beta2 * u + (1.0 - state.beta2) * np.square(g)
    m_hat = m / (1.0 - state.beta1**t)
    u_hat = u / (1.0 - state.beta2**t)
    delta = -state.lr * m_hat / (np.sqrt(u_hat) + state.eps)
    return delta, replace(state, t=t, m=m, u=u)
