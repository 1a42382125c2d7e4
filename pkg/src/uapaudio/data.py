"""Synthetic band-tone dataset: class k is an amplitude-modulated tone in band k.

Each sample is an AM sine whose carrier falls in a class-specific frequency
band, plus uniform noise, affinely mapped into [0, 1]. Carrier and envelope
frequencies are whole numbers of cycles per window, so zero-noise waveforms
are exactly periodic and class energy is leakage-free in the DFT.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioSample, load_wav, save_wav
from .container import read_csv, write_csv
from .exceptions import FormatError, InvalidInputError

SPLITS = ("train", "val", "test")

AM_DEPTH = 0.5
AM_CYCLES = 4  # envelope cycles per window; carriers are multiples of this
TONE_AMPLITUDE = 0.18  # peak of the class tone before noise, in zero-centred units


@dataclass
class SyntheticDataset:
    train: list[AudioSample]
    val: list[AudioSample]
    test: list[AudioSample]
    num_classes: int
    dim: int
    sample_rate: int = 16000
    seed: int | None = None

    def split(self, name: str) -> list[AudioSample]:
        if name not in SPLITS:
            raise InvalidInputError(f"unknown split {name!r}")
        return getattr(self, name)

    def arrays(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        samples = self.split(name)
        if not samples:
            return np.zeros((0, self.dim)), np.zeros(0, dtype=np.int64)
        x = np.stack([s.samples for s in samples])
        y = np.array([s.label for s in samples], dtype=np.int64)
        return x, y


def band_edges(num_classes: int, dim: int) -> np.ndarray:
    """Class band boundaries in DFT bins, away from DC and Nyquist."""
    lo = max(16, dim // 64)
    hi = dim // 2 - lo
    if hi - lo < num_classes * 3 * AM_CYCLES:
        raise InvalidInputError(f"dimension {dim} too small for {num_classes} separable bands")
    return np.linspace(lo, hi, num_classes + 1)


def class_template(dim: int, lo: float, hi: float, tone_amplitude: float) -> np.ndarray:
    """The class's deterministic AM tone, zero-centred, peak |s| <= tone_amplitude.

    The carrier sits mid-band on a multiple of the envelope frequency so the
    waveform is periodic, with both AM sidebands strictly inside (lo, hi).
    """
    first = int(np.ceil((lo + AM_CYCLES) / AM_CYCLES))
    last = int(np.floor((hi - AM_CYCLES) / AM_CYCLES))
    if last < first:
        raise InvalidInputError("band too narrow for an in-band carrier")
    carrier = AM_CYCLES * ((first + last) // 2)
    t = np.arange(dim) / dim
    amp = tone_amplitude / (1.0 + AM_DEPTH)
    return amp * (1.0 + AM_DEPTH * np.sin(2.0 * np.pi * AM_CYCLES * t)) \
        * np.sin(2.0 * np.pi * carrier * t)


def generate_synthetic_dataset(num_classes: int, per_class: int, dim: int,
                               noise_level: float = 0.05, seed: int = 0, *,
                               tone_amplitude: float = TONE_AMPLITUDE,
                               val_per_class: int = 0, test_per_class: int | None = None,
                               sample_rate: int = 16000) -> SyntheticDataset:
    """Build a dataset with per_class training samples per class.

    Each class is a fixed in-band AM tone; samples of the class differ only in
    their uniform noise. Test split defaults to per_class // 2 samples per
    class; validation is empty unless requested. Deterministic given the seed.
    """
    if num_classes < 2:
        raise InvalidInputError("need at least 2 classes")
    if per_class < 1:
        raise InvalidInputError("need at least one training sample per class")
    if not 0.0 <= noise_level < 1.0:
        raise InvalidInputError("noise level must lie in [0, 1)")
    if not 0.0 < tone_amplitude <= 1.0 - noise_level:
        raise InvalidInputError("tone amplitude must lie in (0, 1 - noise_level]")
    if test_per_class is None:
        test_per_class = per_class // 2
    edges = band_edges(num_classes, dim)
    templates = [class_template(dim, edges[k], edges[k + 1], tone_amplitude)
                 for k in range(num_classes)]
    rng = np.random.default_rng(seed)
    splits: dict[str, list[AudioSample]] = {name: [] for name in SPLITS}
    counts = {"train": per_class, "val": val_per_class, "test": test_per_class}
    for name in SPLITS:
        for k in range(num_classes):
            for _ in range(counts[name]):
                s = templates[k]
                if noise_level > 0.0:
                    s = s + noise_level * rng.uniform(-1.0, 1.0, dim)
                x = (s + 1.0) / 2.0
                splits[name].append(AudioSample(x, sample_rate=sample_rate, label=k))
    return SyntheticDataset(splits["train"], splits["val"], splits["test"],
                            num_classes=num_classes, dim=dim, sample_rate=sample_rate, seed=seed)


def save_dataset_dir(dataset: SyntheticDataset, out_dir: str | Path) -> None:
    """Export as WAV files + labels.csv (filename,label,split) + manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for name in SPLITS:
        for i, sample in enumerate(dataset.split(name)):
            fname = f"{name}_{sample.label:02d}_{i:05d}.wav"
            save_wav(sample, out / fname)
            rows.append([fname, str(sample.label), name])
    write_csv(out / "labels.csv", ["filename", "label", "split"], rows)
    manifest = {"kind": "dataset", "num_classes": dataset.num_classes, "dim": dataset.dim,
                "sample_rate": dataset.sample_rate, "seed": dataset.seed}
    (out / "manifest.json").write_bytes(
        json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n")


def load_dataset_dir(in_dir: str | Path) -> SyntheticDataset:
    root = Path(in_dir)
    try:
        manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"missing or corrupt dataset manifest in {in_dir}") from exc
    header, rows = read_csv(root / "labels.csv")
    if header != ["filename", "label", "split"]:
        raise FormatError("labels.csv must have columns filename,label,split")
    splits: dict[str, list[AudioSample]] = {name: [] for name in SPLITS}
    for fname, label, split in rows:
        if split not in SPLITS:
            raise FormatError(f"unknown split tag {split!r} in labels.csv")
        loaded = load_wav(root / fname)
        if len(loaded) != manifest["dim"]:
            raise FormatError(f"{fname}: length {len(loaded)} != dataset dim {manifest['dim']}")
        splits[split].append(AudioSample(loaded.samples, sample_rate=loaded.sample_rate, label=int(label)))
    return SyntheticDataset(splits["train"], splits["val"], splits["test"],
                            num_classes=int(manifest["num_classes"]), dim=int(manifest["dim"]),
                            sample_rate=int(manifest["sample_rate"]), seed=manifest.get("seed"))
