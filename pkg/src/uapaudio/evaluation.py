"""Evaluation harness: reports, transfer matrices, sweeps, significance test.

Success is counted against the clean prediction for untargeted attacks (a
sample is fooled when the perturbed prediction differs from the unperturbed
one) and against the target class for targeted attacks. Loudness metrics are
computed on the applied perturbation, i.e. what is actually added to each
sample after box handling: squash(x' + v') - x for the penalty method,
clip(x + v) - x for the greedy method.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .audio import rel_loudness, snr
from .container import fmt_float, write_csv
from .exceptions import DegenerateVarianceError, InvalidInputError, UndefinedMetricError
from .greedy import GreedyConfig, greedy_uap
from .models import VictimModel
from .penalty import PenaltyConfig, penalty_uap
from .perturbation import Perturbation
from .tanhspace import TANH_EPSILON, perturbed_sample, to_tanh_space

DEFAULT_ALPHA = 0.057
KAPPA_GRID = (0.0, 10.0, 20.0, 40.0, 60.0, 90.0)
DATACOUNT_GRID = (1, 5, 10, 50, 100, 500)

REPORT_COLUMNS = ("sample_id", "clean_pred", "perturbed_pred", "snr_db", "l_db")


@dataclass
class EvalRow:
    sample_id: int
    clean_pred: int
    perturbed_pred: int
    snr_db: float
    l_db: float  # nan when the peak ratio is undefined for this pair


@dataclass
class EvalReport:
    mode: str
    method: str
    train_asr: float | None
    test_asr: float
    mean_snr_db: float
    mean_l_db: float
    rows: list[EvalRow]
    config: dict = field(default_factory=dict)
    wall_clock: float = 0.0  # seconds; informational, never written to artifacts


@dataclass
class TransferMatrix:
    values: np.ndarray  # (n, n); rows = source of the perturbation, cols = victim
    labels: list[str]


@dataclass
class ZTestResult:
    z: float
    z_alpha: float
    alpha: float
    reject: bool  # True when the lower rate is significantly lower


def applied_perturbation(x: np.ndarray, pert: Perturbation) -> np.ndarray:
    """Per-sample additive perturbation actually applied to x (same shape as x)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != pert.dim:
        raise InvalidInputError("perturbation dimension does not match samples")
    if pert.v_tanh is not None:
        eps = float(pert.params.get("epsilon", TANH_EPSILON))
        w = perturbed_sample(to_tanh_space(x, eps), pert.v_tanh)
        return w - x
    return np.clip(x + pert.v_signal, 0.0, 1.0) - x


def evaluate_uap(model: VictimModel, testset: tuple[np.ndarray, np.ndarray],
                 pert: Perturbation, mode: str | None = None) -> EvalReport:
    """Score a crafted perturbation against a model on an evaluation set.

    testset is an (X, y) pair. Success is judged on predictions alone: the
    labels y only have to line up with X (they stay in the report rows'
    implicit order and are not consulted otherwise).
    """
    started = time.perf_counter()
    x, y = testset
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] == 0:
        raise InvalidInputError("empty evaluation set")
    if y is not None and len(y) != x.shape[0]:
        raise InvalidInputError("labels must align with samples")
    mode = mode or pert.mode
    if mode not in ("untargeted", "targeted"):
        raise InvalidInputError("mode must be 'untargeted' or 'targeted'")
    if mode == "targeted" and pert.target is None:
        raise InvalidInputError("targeted evaluation needs a perturbation with a target")

    applied = applied_perturbation(x, pert)
    clean_preds = model.predict(x)
    adv_preds = model.predict(x + applied)
    if mode == "targeted":
        fooled = adv_preds == pert.target
    else:
        fooled = adv_preds != clean_preds

    rows = []
    for i in range(x.shape[0]):
        try:
            l_db = rel_loudness(x[i], applied[i])
        except UndefinedMetricError:
            l_db = float("nan")
        rows.append(EvalRow(i, int(clean_preds[i]), int(adv_preds[i]),
                            snr(x[i], applied[i]), l_db))

    snrs = np.array([r.snr_db for r in rows])
    l_dbs = np.array([r.l_db for r in rows])
    finite_l = l_dbs[np.isfinite(l_dbs)]
    return EvalReport(
        mode=mode, method=pert.method, train_asr=pert.train_asr,
        test_asr=float(np.mean(fooled)),
        mean_snr_db=float(np.mean(snrs)),
        mean_l_db=float(np.mean(finite_l)) if finite_l.size else float("nan"),
        rows=rows,
        config={"method": pert.method, "mode": mode, "target": pert.target,
                "p": ("inf" if pert.p is not None and np.isinf(pert.p) else pert.p),
                "xi": pert.xi, "seed": pert.seed, "params": dict(pert.params)},
        wall_clock=time.perf_counter() - started,
    )


def report_to_csv(report: EvalReport, path: str | Path) -> None:
    rows = [[str(r.sample_id), str(r.clean_pred), str(r.perturbed_pred),
             fmt_float(r.snr_db), fmt_float(r.l_db)] for r in report.rows]
    write_csv(path, list(REPORT_COLUMNS), rows)


def report_summary(report: EvalReport) -> dict:
    """Headline numbers, JSON-ready (used by the CLI manifest and sweeps)."""
    return {
        "mode": report.mode,
        "method": report.method,
        "train_asr": report.train_asr,
        "test_asr": report.test_asr,
        "mean_snr_db": report.mean_snr_db,
        "mean_l_db": (None if not np.isfinite(report.mean_l_db) else report.mean_l_db),
        "samples": len(report.rows),
    }


def transfer_matrix(models: list[VictimModel], perts: list[Perturbation],
                    testset: tuple[np.ndarray, np.ndarray],
                    labels: list[str] | None = None) -> TransferMatrix:
    """Cross-model success rates: entry (i, j) scores source i's perturbation
    against victim j. The diagonal (self-attack) is left undefined."""
    if len(models) < 2:
        raise InvalidInputError("transfer needs at least 2 models")
    if len(perts) != len(models):
        raise InvalidInputError("one perturbation per source model required")
    dims = {m.input_dim for m in models}
    if len(dims) != 1:
        raise InvalidInputError("models must share an input dimension")
    n = len(models)
    values = np.full((n, n), np.nan)
    for i, pert in enumerate(perts):
        for j, victim in enumerate(models):
            if i == j:
                continue
            values[i, j] = evaluate_uap(victim, testset, pert).test_asr
    if labels is None:
        labels = [f"{m.arch}-{k}" for k, m in enumerate(models)]
    return TransferMatrix(values, list(labels))


def transfer_to_csv(matrix: TransferMatrix, path: str | Path) -> None:
    rows = []
    for i, name in enumerate(matrix.labels):
        row = [name]
        for j in range(len(matrix.labels)):
            v = matrix.values[i, j]
            row.append("" if not np.isfinite(v) else fmt_float(v))
        rows.append(row)
    write_csv(path, ["source\\victim"] + matrix.labels, rows)


def two_proportion_z(p_l: float, p_h: float, m: int,
                     alpha: float = DEFAULT_ALPHA) -> ZTestResult:
    """Z statistic for comparing two success proportions over m samples.

    Uses the pooled-variance form Z = (p_l - p_h) / sqrt(2 p(1-p)/m) with
    p = (p_l + p_h)/2, and rejects equality (one-sided) when Z < -z_alpha.
    """
    if not 0.0 <= p_l <= p_h <= 1.0:
        raise InvalidInputError("need 0 <= p_l <= p_h <= 1")
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError("alpha must lie in (0, 1)")
    pooled = (p_l + p_h) / 2.0
    if pooled in (0.0, 1.0):
        raise DegenerateVarianceError("pooled proportion is degenerate (0 or 1)")
    z = (p_l - p_h) / np.sqrt(2.0 * pooled * (1.0 - pooled) / m)
    z_alpha = NormalDist().inv_cdf(1.0 - alpha)
    return ZTestResult(float(z), float(z_alpha), alpha, bool(z < -z_alpha))


def _seeded_subset(n: int, m: int, seed: int) -> np.ndarray:
    # first m of a seeded shuffle, kept in original order
    order = np.random.default_rng(seed).permutation(n)
    return np.sort(order[:m])


def sweep_confidence(model: VictimModel, x: np.ndarray, y: np.ndarray,
                     testset: tuple[np.ndarray, np.ndarray],
                     kappa_grid=KAPPA_GRID,
                     cfg: PenaltyConfig | None = None) -> list[tuple[float, EvalReport]]:
    """One penalty craft+evaluate cycle per confidence value."""
    kappas = [float(k) for k in kappa_grid]
    if not kappas:
        raise InvalidInputError("empty confidence grid")
    if cfg is None:
        cfg = PenaltyConfig()
    out = []
    for kappa in kappas:
        run_cfg = replace(cfg, kappa=kappa)
        result = penalty_uap(model, x, y, run_cfg)
        out.append((kappa, evaluate_uap(model, testset, result.perturbation)))
    return out


def sweep_datacount(model: VictimModel, x: np.ndarray, y: np.ndarray,
                    testset: tuple[np.ndarray, np.ndarray],
                    m_grid=DATACOUNT_GRID,
                    greedy_cfg: GreedyConfig | None = None,
                    penalty_cfg: PenaltyConfig | None = None,
                    seed: int = 0) -> list[tuple[str, int, EvalReport]]:
    """Craft with both methods from the first m samples of one seeded shuffle."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    counts = sorted({int(m) for m in m_grid if 1 <= int(m) <= x.shape[0]})
    if not counts:
        raise InvalidInputError("data-count grid has no feasible sizes")
    if greedy_cfg is None:
        greedy_cfg = GreedyConfig()
    if penalty_cfg is None:
        penalty_cfg = PenaltyConfig(mode=greedy_cfg.mode, target=greedy_cfg.target)
    out = []
    for m in counts:
        idx = _seeded_subset(x.shape[0], m, seed)
        g = greedy_uap(model, x[idx], greedy_cfg)
        out.append(("greedy", m, evaluate_uap(model, testset, g.perturbation)))
        p = penalty_uap(model, x[idx], y[idx], penalty_cfg)
        out.append(("penalty", m, evaluate_uap(model, testset, p.perturbation)))
    return out


def sweep_to_csv(rows: list[dict], path: str | Path) -> None:
    """Write sweep rows (uniform dict keys, scalar values) as CSV."""
    if not rows:
        raise InvalidInputError("no sweep rows to write")
    columns = list(rows[0].keys())
    body = []
    for row in rows:
        rendered = []
        for col in columns:
            v = row[col]
            rendered.append(fmt_float(v) if isinstance(v, float) else str(v))
        body.append(rendered)
    write_csv(path, columns, body)


def confidence_sweep_rows(results: list[tuple[float, EvalReport]]) -> list[dict]:
    return [{"kappa": kappa, "train_asr": float(r.train_asr), "test_asr": r.test_asr,
             "mean_snr_db": r.mean_snr_db, "mean_l_db": r.mean_l_db}
            for kappa, r in results]


def datacount_sweep_rows(results: list[tuple[str, int, EvalReport]]) -> list[dict]:
    return [{"method": method, "m": m, "train_asr": float(r.train_asr),
             "test_asr": r.test_asr, "mean_snr_db": r.mean_snr_db,
             "mean_l_db": r.mean_l_db}
            for method, m, r in results]


def single_sample_attack(model: VictimModel, x: np.ndarray, y: np.ndarray,
                         testset: tuple[np.ndarray, np.ndarray],
                         cfg: PenaltyConfig | None = None,
                         iters: int = 19) -> list[tuple[int, EvalReport]]:
    """Craft one penalty perturbation per class from a single sample of it.

    x holds exactly one sample per class (y gives the classes, all distinct);
    each run uses a fixed small iteration budget and a high-confidence hinge.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if x.shape[0] != y.shape[0] or y.size == 0:
        raise InvalidInputError("need one labeled sample per class")
    if np.unique(y).size != y.size:
        raise InvalidInputError("classes must be distinct")
    if cfg is None:
        cfg = PenaltyConfig(c=0.2, kappa=90.0, batch_size=1)
    cfg = replace(cfg, max_iters=int(iters))
    out = []
    for k in np.argsort(y):
        label = int(y[k])
        result = penalty_uap(model, x[k : k + 1], y[k : k + 1], cfg)
        out.append((label, evaluate_uap(model, testset, result.perturbation)))
    return out
