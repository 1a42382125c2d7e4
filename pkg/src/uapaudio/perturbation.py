"""Universal perturbation artifact and its single-file format.

The artifact carries the signal-space vector (always) and, for the penalty
method, the tanh-space carrier it was optimized in. Saved manifests record
norms and SPL of the stored (float32-rounded) signal vector, so a loaded file
re-saves byte-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import spl
from .container import read_container, write_container
from .exceptions import FormatError, InvalidInputError


@dataclass
class Perturbation:
    v_signal: np.ndarray
    method: str  # "greedy" | "penalty"
    mode: str  # "untargeted" | "targeted"
    v_tanh: np.ndarray | None = None
    target: int | None = None
    p: float | None = None  # norm order of the crafting constraint (2 or inf)
    xi: float | None = None
    seed: int | None = None
    train_asr: float | None = None
    params: dict = field(default_factory=dict)  # method-specific settings

    def __post_init__(self) -> None:
        v = np.asarray(self.v_signal, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise InvalidInputError("perturbation must be a non-empty 1-D vector")
        self.v_signal = v
        if self.v_tanh is not None:
            vt = np.asarray(self.v_tanh, dtype=np.float64)
            if vt.shape != v.shape:
                raise InvalidInputError("tanh-space and signal-space vectors must match in length")
            self.v_tanh = vt
        if self.method not in ("greedy", "penalty"):
            raise InvalidInputError(f"unknown method {self.method!r}")
        if self.mode not in ("untargeted", "targeted"):
            raise InvalidInputError(f"unknown mode {self.mode!r}")

    @property
    def dim(self) -> int:
        return int(self.v_signal.size)

    def l2(self) -> float:
        return float(np.linalg.norm(self.v_signal))

    def linf(self) -> float:
        return float(np.max(np.abs(self.v_signal)))

    def spl_db(self) -> float:
        return spl(self.v_signal)


def _encode_p(p: float | None) -> float | str | None:
    if p is None:
        return None
    return "inf" if np.isinf(p) else float(p)


def _decode_p(p) -> float | None:
    if p is None:
        return None
    return np.inf if p == "inf" else float(p)


def save_perturbation(pert: Perturbation, path: str | Path) -> None:
    # round to storage precision first so recorded norms match the stored blob
    v = pert.v_signal.astype("<f4").astype(np.float64)
    blobs = {"v_signal": v}
    if pert.v_tanh is not None:
        blobs["v_tanh"] = pert.v_tanh.astype("<f4").astype(np.float64)
    manifest = {
        "kind": "perturbation",
        "format": 1,
        "method": pert.method,
        "mode": pert.mode,
        "target": pert.target,
        "p": _encode_p(pert.p),
        "xi": pert.xi,
        "d": pert.dim,
        "seed": pert.seed,
        "train_asr": pert.train_asr,
        "norms": {"l2": float(np.linalg.norm(v)), "linf": float(np.max(np.abs(v)))},
        "spl": spl(v),
        "params": pert.params,
    }
    write_container(path, manifest, blobs)


def load_perturbation(path: str | Path) -> Perturbation:
    manifest, blobs = read_container(path)
    if manifest.get("kind") != "perturbation":
        raise FormatError(f"not a perturbation file: {path}")
    return Perturbation(
        v_signal=blobs["v_signal"],
        method=manifest["method"],
        mode=manifest["mode"],
        v_tanh=blobs.get("v_tanh"),
        target=manifest.get("target"),
        p=_decode_p(manifest.get("p")),
        xi=manifest.get("xi"),
        seed=manifest.get("seed"),
        train_asr=manifest.get("train_asr"),
        params=manifest.get("params", {}),
    )
