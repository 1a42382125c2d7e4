"""Penalty-method universal perturbation, optimized in tanh space with Adam.

The objective trades the perturbation's sound pressure level against a hinge
on the victim's logits:

    L(w_i) = SPL(v') + c * G(logits(w_i))      w_i = squash(x'_i + v')

where G is floored at -kappa and vanishes (at kappa = 0) exactly when the
attack condition holds. Gradients are accumulated over a mini-batch as a plain
sum and applied with Adam; the perturbed samples never need clipping because
the squash keeps them strictly inside (0, 1).

The loop's SPL term is evaluated at v' directly. Recovering it from w_i gives
the same value in exact arithmetic but adds tanh round-trip noise; the
standalone penalty_loss keeps the literal recovery form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import POWER_FLOOR, rms_power, spl
from .exceptions import InvalidInputError
from .greedy import project_lp
from .models import VictimModel
from .optim import AdamState, adam_update
from .perturbation import Perturbation
from .tanhspace import TANH_EPSILON, perturbed_sample, recover_vprime, render_signal_v, to_tanh_space

_LOG10_SCALE = 20.0 / np.log(10.0)


@dataclass
class PenaltyConfig:
    mode: str = "untargeted"
    target: int | None = None
    c: float | None = None  # defaults: 0.2 untargeted, 0.15 targeted
    kappa: float | None = None  # defaults: 40 untargeted, 10 targeted
    delta: float = 0.1
    batch_size: int = 100
    max_iters: int = 100
    min_iters: int = 0  # defer the success check: forces at least this many updates
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epsilon: float = TANH_EPSILON
    project: tuple[float, float] | None = None  # optional (p, xi) post-projection
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("untargeted", "targeted"):
            raise InvalidInputError("mode must be 'untargeted' or 'targeted'")
        if self.mode == "targeted" and self.target is None:
            raise InvalidInputError("targeted crafting needs a target class")
        if self.c is None:
            self.c = 0.2 if self.mode == "untargeted" else 0.15
        if self.kappa is None:
            self.kappa = 40.0 if self.mode == "untargeted" else 10.0
        if self.c <= 0.0:
            raise InvalidInputError("c must be positive")
        if self.kappa < 0.0:
            raise InvalidInputError("kappa must be non-negative")
        if not 0.0 < self.delta <= 1.0:
            raise InvalidInputError("delta must lie in (0, 1]")
        if self.batch_size < 1 or self.max_iters < 1:
            raise InvalidInputError("batch size and iteration cap must be >= 1")
        if not 0 <= self.min_iters <= self.max_iters:
            raise InvalidInputError("min_iters must lie in [0, max_iters]")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidInputError("epsilon must lie in (0, 1)")
        if self.project is not None:
            p, xi = self.project
            if not (p == 2 or np.isinf(p)) or xi <= 0.0:
                raise InvalidInputError("post-projection needs p in {2, inf} and xi > 0")


@dataclass
class PenaltyResult:
    perturbation: Perturbation
    asr_trace: list[float]  # full-set rate before each update, plus the final check
    trace: list[dict]  # one record per update: losses, SPL terms, hinge mean
    converged: bool
    iterations: int


def hinge_targeted(logits: np.ndarray, target: int, kappa: float) -> float:
    """max(best-other logit - target logit, -kappa); zero iff target on top at kappa=0."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1 or logits.size < 2:
        raise InvalidInputError("need a logit vector with at least 2 classes")
    if not 0 <= target < logits.size:
        raise InvalidInputError("target class out of range")
    others = np.delete(logits, target)
    return float(max(others.max() - logits[target], -kappa))


def hinge_untargeted(logits: np.ndarray, label: int, kappa: float) -> float:
    """max(label logit - best-other logit, -kappa); zero iff label dethroned at kappa=0."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1 or logits.size < 2:
        raise InvalidInputError("need a logit vector with at least 2 classes")
    if not 0 <= label < logits.size:
        raise InvalidInputError("label out of range")
    others = np.delete(logits, label)
    return float(max(logits[label] - others.max(), -kappa))


def _hinge_batch(logits: np.ndarray, refs: np.ndarray, kappa: float,
                 mode: str) -> tuple[np.ndarray, np.ndarray]:
    """Hinge values and subgradients w.r.t. logits for a batch.

    At the floor (margin <= -kappa) the subgradient is taken as 0.
    """
    n = logits.shape[0]
    rows = np.arange(n)
    masked = logits.copy()
    masked[rows, refs] = -np.inf
    runner = masked.argmax(axis=1)  # best class other than the reference
    ref_logit = logits[rows, refs]
    other_logit = logits[rows, runner]
    margin = ref_logit - other_logit if mode == "untargeted" else other_logit - ref_logit
    values = np.maximum(margin, -kappa)
    active = (margin > -kappa).astype(np.float64)
    sign = 1.0 if mode == "untargeted" else -1.0
    dlogits = np.zeros_like(logits)
    dlogits[rows, refs] = sign * active
    dlogits[rows, runner] -= sign * active
    return values, dlogits


def _spl_gradient(u: np.ndarray) -> np.ndarray:
    # gradient of 20*log10(rms(u)); zero below the floor where SPL is constant
    if rms_power(u) <= POWER_FLOOR:
        return np.zeros_like(u)
    return _LOG10_SCALE * u / float(np.dot(u, u))


def penalty_loss(model: VictimModel, w: np.ndarray, x_tanh: np.ndarray, reference: int,
                 c: float, kappa: float, mode: str = "untargeted") -> tuple[float, np.ndarray]:
    """Objective value and its gradient w.r.t. the perturbed sample w.

    The SPL term is computed on the perturbation recovered from w, so the
    returned gradient is the true gradient of the evaluated expression.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise InvalidInputError("w must be a nonempty vector")
    u = recover_vprime(w, x_tanh)  # raises at the 0/1 singularities
    logits, caches = model.forward_cached(w)
    values, dlogits = _hinge_batch(logits, np.array([reference]), kappa, mode)
    hinge_grad_w = model.backward_input(caches, dlogits)[0]
    loss = spl(u) + c * float(values[0])
    du_dw = 1.0 / (2.0 * w * (1.0 - w))
    grad = _spl_gradient(u) * du_dw + c * hinge_grad_w
    return float(loss), grad


class _BatchStream:
    """Seeded shuffle without replacement, reshuffled each pass."""

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        self.n = n
        self.batch_size = min(batch_size, n)
        self.rng = rng
        self.order = rng.permutation(n)
        self.cursor = 0

    def next(self) -> np.ndarray:
        if self.cursor >= self.n:
            self.order = self.rng.permutation(self.n)
            self.cursor = 0
        batch = self.order[self.cursor : self.cursor + self.batch_size]
        self.cursor += self.batch_size
        return batch


def _asr_tanh(model: VictimModel, x_tanh: np.ndarray, v_tanh: np.ndarray,
              labels: np.ndarray, mode: str, target: int | None) -> float:
    preds = model.predict(perturbed_sample(x_tanh, v_tanh))
    if mode == "targeted":
        return float(np.mean(preds == target))
    return float(np.mean(preds != labels))


def penalty_uap(model: VictimModel, x: np.ndarray, y: np.ndarray | None,
                cfg: PenaltyConfig) -> PenaltyResult:
    """Craft a universal perturbation by penalty descent in tanh space.

    y holds the samples' labels; an untargeted attack counts a sample as
    fooled when the perturbed prediction differs from its label. For targeted
    attacks y may be None.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] == 0 or x.shape[1] == 0:
        raise InvalidInputError("empty crafting set")
    m, d = x.shape
    if y is None:
        if cfg.mode == "untargeted":
            raise InvalidInputError("untargeted crafting needs labels")
        y = np.zeros(m, dtype=np.int64)
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if y.shape != (m,):
        raise InvalidInputError("labels must align with samples")
    if np.any(y < 0) or np.any(y >= model.num_classes):
        raise InvalidInputError("label out of range for the victim")

    x_tanh = to_tanh_space(x, cfg.epsilon)
    rng = np.random.default_rng(cfg.seed)
    stream = _BatchStream(m, cfg.batch_size, rng)
    adam = AdamState(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
    v = np.zeros(d)
    best_v = v
    best_asr = -1.0

    asr_trace: list[float] = []
    records: list[dict] = []
    converged = False
    iteration = 0

    while True:
        current = _asr_tanh(model, x_tanh, v, y, cfg.mode, cfg.target)
        asr_trace.append(current)
        if current >= best_asr:  # ties keep the latest (deepest) iterate
            best_asr, best_v = current, v
        if iteration >= cfg.min_iters and current >= 1.0 - cfg.delta:
            converged = True
            break
        if iteration >= cfg.max_iters:
            break

        batch = stream.next()
        w = perturbed_sample(x_tanh[batch], v)
        logits, caches = model.forward_cached(w)
        refs = np.full(batch.size, cfg.target) if cfg.mode == "targeted" else y[batch]
        hinges, dlogits = _hinge_batch(logits, refs, cfg.kappa, cfg.mode)
        hinge_grad_w = model.backward_input(caches, dlogits)  # (batch, d)

        spl_v = spl(v)
        losses = spl_v + cfg.c * hinges
        records.append({
            "iteration": iteration,
            "asr": current,
            "loss_mean": float(np.mean(losses)),
            "loss_min": float(np.min(losses)),
            "hinge_mean": float(np.mean(hinges)),
            "spl_vprime": spl_v,
            "spl_render": spl(render_signal_v(v, cfg.epsilon)),
        })

        # d(w)/d(v') = sech^2(x'+v')/2 = 2w(1-w); plain sum over the batch
        chain = 2.0 * w * (1.0 - w)
        grad = batch.size * _spl_gradient(v) + cfg.c * np.sum(hinge_grad_w * chain, axis=0)
        step, adam = adam_update(adam, grad)
        v = v + step
        if cfg.project is not None:
            p, xi = cfg.project
            centered = render_signal_v(v, cfg.epsilon) - 0.5
            projected = project_lp(centered, p, xi)
            if not np.array_equal(projected, centered):
                v = to_tanh_space(projected + 0.5, cfg.epsilon)
        iteration += 1

    pert = Perturbation(
        v_signal=render_signal_v(best_v, cfg.epsilon), method="penalty", mode=cfg.mode,
        v_tanh=best_v, target=cfg.target, seed=cfg.seed, train_asr=best_asr,
        p=(cfg.project[0] if cfg.project else None),
        xi=(cfg.project[1] if cfg.project else None),
        params={"c": cfg.c, "kappa": cfg.kappa, "S": cfg.batch_size, "lr": cfg.lr,
                "epsilon": cfg.epsilon,
                "projection": ([("inf" if np.isinf(cfg.project[0]) else cfg.project[0]),
                                cfg.project[1]] if cfg.project else None)},
    )
    return PenaltyResult(pert, asr_trace, records, converged, iteration)
