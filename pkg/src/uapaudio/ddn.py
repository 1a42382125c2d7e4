"""Minimal-norm L2 inner attack with a decoupled direction/norm schedule.

Each step takes a gradient-normalized cross-entropy step (cosine step size),
then rescales the perturbation onto a sphere whose radius shrinks by gamma
after an adversarial iterate and grows by gamma otherwise. The result is the
smallest-norm iterate that satisfied the attack condition; candidates are
always evaluated at clip(x + delta, 0, 1) so they honor the signal box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError
from .models import VictimModel, softmax


@dataclass
class InnerAttackConfig:
    steps: int = 50
    init_norm: float = 0.2
    gamma: float = 0.05  # relative radius adjustment per step
    step_size_start: float = 1.0
    step_size_end: float = 0.01
    mode: str = "untargeted"
    target: int | None = None

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise InvalidInputError("steps must be >= 1")
        if self.init_norm <= 0.0:
            raise InvalidInputError("init_norm must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise InvalidInputError("gamma must lie in (0, 1)")
        if self.mode not in ("untargeted", "targeted"):
            raise InvalidInputError("mode must be 'untargeted' or 'targeted'")
        if self.mode == "targeted" and self.target is None:
            raise InvalidInputError("targeted attack needs a target class")


@dataclass
class InnerAttackResult:
    delta: np.ndarray
    success: bool
    l2_norm: float
    radius_trace: np.ndarray  # initial radius followed by one entry per step


def _satisfied(pred: int, mode: str, reference: int) -> bool:
    return pred == reference if mode == "targeted" else pred != reference


def ddn_minimal_perturbation(model: VictimModel, x: np.ndarray, cfg: InnerAttackConfig,
                             reference_class: int | None = None) -> InnerAttackResult:
    """Smallest-L2 additive perturbation flipping (or forcing) the prediction.

    reference_class is the class to escape (untargeted) or reach (targeted);
    defaults to the model's clean prediction of x, or cfg.target.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("inner attack expects a single sample")
    if float(x.min()) < 0.0 or float(x.max()) > 1.0:
        raise InvalidInputError("sample must lie in [0, 1]")
    if reference_class is None:
        reference_class = cfg.target if cfg.mode == "targeted" else int(model.predict(x))

    delta = np.zeros_like(x)
    radius = cfg.init_norm
    trace = [radius]
    best: np.ndarray | None = None
    best_norm = np.inf

    for k in range(cfg.steps):
        alpha = cfg.step_size_end + 0.5 * (cfg.step_size_start - cfg.step_size_end) \
            * (1.0 + np.cos(np.pi * k / cfg.steps))
        point = np.clip(x + delta, 0.0, 1.0)
        logits, caches = model.forward_cached(point)
        is_adv = _satisfied(int(np.argmax(logits[0])), cfg.mode, reference_class)
        if is_adv:
            norm = float(np.linalg.norm(delta))
            if norm < best_norm:
                best, best_norm = delta.copy(), norm

        # cross-entropy gradient about the reference class at the current point
        dlogits = softmax(logits[0])
        dlogits[reference_class] -= 1.0
        grad = model.backward_input(caches, dlogits[None])[0]
        gnorm = float(np.linalg.norm(grad))
        if gnorm > 0.0:
            step = (alpha / gnorm) * grad
            delta = delta + step if cfg.mode == "untargeted" else delta - step

        radius = radius * (1.0 - cfg.gamma) if is_adv else radius * (1.0 + cfg.gamma)
        trace.append(radius)
        dnorm = float(np.linalg.norm(delta))
        if dnorm > 0.0:
            delta = delta * (radius / dnorm)

    # the final projected iterate was never evaluated inside the loop
    final_pred = int(model.predict(np.clip(x + delta, 0.0, 1.0)))
    if _satisfied(final_pred, cfg.mode, reference_class):
        norm = float(np.linalg.norm(delta))
        if norm < best_norm:
            best, best_norm = delta.copy(), norm

    if best is None:
        return InnerAttackResult(delta, False, float(np.linalg.norm(delta)), np.asarray(trace))
    return InnerAttackResult(best, True, best_norm, np.asarray(trace))
