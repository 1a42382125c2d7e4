"""Waveform container, loudness metrics and 16-bit PCM WAV I/O.

Signals are unipolar floats in [0, 1], the input range the victim models are
trained on. PCM integers map into that range on load and back with rounding on
save, so a load -> save cycle is byte identical.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import FormatError, InvalidInputError, UndefinedMetricError

DEFAULT_SAMPLE_RATE = 16000

# RMS floor applied before taking logs, so silence has a defined level
# (20*log10(1e-12) = -240 dB) instead of -inf.
POWER_FLOOR = 1e-12


@dataclass(frozen=True)
class AudioSample:
    """A mono waveform in [0, 1] with an optional class label."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE
    label: int | None = None

    def __post_init__(self) -> None:
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1 or x.size == 0:
            raise InvalidInputError("waveform must be a non-empty 1-D array")
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("waveform contains non-finite values")
        if float(x.min()) < 0.0 or float(x.max()) > 1.0:
            raise InvalidInputError("waveform values must lie in [0, 1]")
        if self.sample_rate <= 0:
            raise InvalidInputError("sample rate must be positive")
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return int(self.samples.size)


def rms_power(v: np.ndarray) -> float:
    """Root mean square of a signal vector."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise InvalidInputError("rms of an empty vector is undefined")
    return float(np.sqrt(np.mean(np.square(v))))


def spl(v: np.ndarray) -> float:
    """Sound pressure level in dB: 20*log10(rms), floored at POWER_FLOOR."""
    return float(20.0 * np.log10(max(rms_power(v), POWER_FLOOR)))


def snr(x: np.ndarray, v: np.ndarray) -> float:
    """Signal-to-noise ratio in dB of signal x against perturbation v."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if x.shape != v.shape:
        raise InvalidInputError("snr requires equal-length vectors")
    return spl(x) - spl(v)


def _peak_db(v: np.ndarray) -> float:
    # peak over strictly positive entries only; log10 of <= 0 is undefined
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise InvalidInputError("peak level of an empty vector is undefined")
    positive = v[v > 0.0]
    if positive.size == 0:
        raise UndefinedMetricError("no strictly positive entries")
    return float(20.0 * np.log10(positive.max()))


def rel_loudness(x: np.ndarray, v: np.ndarray) -> float:
    """Peak level of v minus peak level of x, in dB.

    An audibility proxy close in spirit to the l-infinity norm: how far below
    the signal's loudest sample the perturbation's loudest sample sits.
    """
    return _peak_db(v) - _peak_db(x)


def load_wav(path: str | Path) -> AudioSample:
    """Read a mono 16-bit PCM WAV into [0, 1] via s -> (s/32768 + 1)/2."""
    try:
        with wave.open(str(path), "rb") as fh:
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            frames = fh.getnframes()
            raw = fh.readframes(frames)
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"not a readable WAV file: {path}") from exc
    if channels != 1:
        raise FormatError("only mono WAV files are supported")
    if width != 2:
        raise FormatError("only 16-bit PCM WAV files are supported")
    pcm = np.frombuffer(raw, dtype="<i2")
    if pcm.size != frames:
        raise FormatError("truncated WAV payload")
    if pcm.size == 0:
        raise FormatError("empty WAV file")
    x = (pcm.astype(np.float64) / 32768.0 + 1.0) / 2.0
    return AudioSample(samples=x, sample_rate=rate)


def save_wav(sample: AudioSample, path: str | Path) -> None:
    """Write a mono 16-bit PCM WAV, inverting the load mapping with rounding."""
    s = np.rint((2.0 * sample.samples - 1.0) * 32768.0)
    pcm = np.clip(s, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(sample.sample_rate)
        fh.writeframes(pcm.tobytes())
