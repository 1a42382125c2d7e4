"""Iterative greedy universal perturbation.

Walk the training set in a seeded shuffled order; for every sample the current
universal perturbation does not already fool, find a minimal per-sample
perturbation with the inner attack, add it to the aggregate and project back
onto the Lp ball. Stop once the training attack success rate reaches 1 - delta
or the epoch cap is hit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ddn import InnerAttackConfig, ddn_minimal_perturbation
from .exceptions import InvalidInputError
from .models import VictimModel
from .perturbation import Perturbation


@dataclass
class GreedyConfig:
    mode: str = "untargeted"
    target: int | None = None
    p: float = np.inf
    xi: float | None = None  # defaults: 0.2 untargeted, 0.12 targeted
    delta: float = 0.1  # residual fooling tolerance
    max_epochs: int = 100
    seed: int = 0
    inner: InnerAttackConfig | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("untargeted", "targeted"):
            raise InvalidInputError("mode must be 'untargeted' or 'targeted'")
        if self.mode == "targeted" and self.target is None:
            raise InvalidInputError("targeted crafting needs a target class")
        if not (self.p == 2 or np.isinf(self.p)):
            raise InvalidInputError("norm order must be 2 or inf")
        if not 0.0 < self.delta <= 1.0:
            raise InvalidInputError("delta must lie in (0, 1]")
        if self.max_epochs < 1:
            raise InvalidInputError("max_epochs must be >= 1")
        if self.xi is None:
            self.xi = 0.2 if self.mode == "untargeted" else 0.12
        if self.xi <= 0.0:
            raise InvalidInputError("xi must be positive")
        if self.inner is None:
            self.inner = InnerAttackConfig(mode=self.mode, target=self.target)
        elif self.inner.mode != self.mode:
            raise InvalidInputError("inner attack mode must match crafting mode")


@dataclass
class GreedyResult:
    perturbation: Perturbation
    asr_trace: list[float]  # initial value plus one entry per epoch
    converged: bool
    epochs: int
    inner_calls: int


def project_lp(v: np.ndarray, p: float, xi: float) -> np.ndarray:
    """Euclidean projection onto the Lp ball of radius xi, p in {2, inf}."""
    if xi <= 0.0:
        raise InvalidInputError("xi must be positive")
    v = np.asarray(v, dtype=np.float64)
    if np.isinf(p):
        return np.clip(v, -xi, xi)
    if p == 2:
        norm = float(np.linalg.norm(v))
        return v if norm <= xi else v * (xi / norm)
    raise InvalidInputError("norm order must be 2 or inf")


def asr(model: VictimModel, x: np.ndarray, v: np.ndarray, mode: str,
        target: int | None = None, reference: np.ndarray | None = None) -> float:
    """Attack success rate of additive perturbation v over samples x.

    Perturbed inputs are clipped to [0, 1] before prediction. The untargeted
    reference defaults to the model's clean predictions.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] == 0:
        raise InvalidInputError("empty sample set")
    preds = model.predict(np.clip(x + v, 0.0, 1.0))
    if mode == "targeted":
        if target is None:
            raise InvalidInputError("targeted rate needs a target class")
        return float(np.mean(preds == target))
    if reference is None:
        reference = model.predict(x)
    return float(np.mean(preds != reference))


def greedy_uap(model: VictimModel, x: np.ndarray, cfg: GreedyConfig) -> GreedyResult:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] == 0:
        raise InvalidInputError("empty crafting set")
    if float(x.min()) < 0.0 or float(x.max()) > 1.0:
        raise InvalidInputError("samples must lie in [0, 1]")
    m, d = x.shape

    clean_preds = np.atleast_1d(model.predict(x))
    rng = np.random.default_rng(cfg.seed)
    v = np.zeros(d)
    trace = [asr(model, x, v, cfg.mode, cfg.target, reference=clean_preds)]
    inner_calls = 0
    epochs = 0

    while trace[-1] < 1.0 - cfg.delta and epochs < cfg.max_epochs:
        for i in rng.permutation(m):
            point = np.clip(x[i] + v, 0.0, 1.0)
            pred = int(model.predict(point))
            fooled = pred == cfg.target if cfg.mode == "targeted" else pred != clean_preds[i]
            if fooled:
                continue
            reference = cfg.target if cfg.mode == "targeted" else int(clean_preds[i])
            result = ddn_minimal_perturbation(model, point, cfg.inner, reference_class=reference)
            inner_calls += 1
            v = project_lp(v + result.delta, cfg.p, cfg.xi)
        epochs += 1
        trace.append(asr(model, x, v, cfg.mode, cfg.target, reference=clean_preds))

    pert = Perturbation(
        v_signal=v, method="greedy", mode=cfg.mode, target=cfg.target,
        p=cfg.p, xi=cfg.xi, seed=cfg.seed, train_asr=trace[-1],
        params={"delta": cfg.delta, "max_epochs": cfg.max_epochs,
                "inner_steps": cfg.inner.steps, "inner_init_norm": cfg.inner.init_norm,
                "inner_gamma": cfg.inner.gamma},
    )
    return GreedyResult(pert, trace, converged=trace[-1] >= 1.0 - cfg.delta,
                        epochs=epochs, inner_calls=inner_calls)
