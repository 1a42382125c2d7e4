"""Desk-scale raw-waveform classifiers with hand-written reverse-mode gradients.

Registry architectures:

    rand-cnn    two conv-relu-maxpool blocks + dense head, random init
    gamma-cnn   same topology with a frozen band-pass filterbank first layer
    linear      flatten + one dense layer, for closed-form oracle tests

Layer forwards are pure functions returning (output, cache); backward consumes
the cache, so one immutable model serves concurrent forward/gradient calls.
All arithmetic is float64. Parameters are kept exactly float32-representable,
so checkpoints (JSON manifest + little-endian f32 blob) round-trip bit-exactly.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .container import read_container, write_container
from .exceptions import FormatError, InvalidInputError
from .optim import AdamState, adam_update

Head = Callable[[np.ndarray], tuple[float, np.ndarray]]


def _f32_exact(a: np.ndarray) -> np.ndarray:
    # round once to float32 values so in-memory params equal their checkpoint
    return a.astype("<f4").astype(np.float64)


class Conv1D:
    """1-D convolution over (batch, length, channels) -> (batch, out, filters)."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray, stride: int, frozen: bool = False):
        self.weight = np.asarray(weight, dtype=np.float64)  # (filters, kernel, in_ch)
        self.bias = np.asarray(bias, dtype=np.float64)  # (filters,)
        self.stride = int(stride)
        self.frozen = frozen

    def spec(self) -> dict:
        return {"type": "conv1d", "stride": self.stride, "frozen": self.frozen}

    def params(self) -> dict[str, np.ndarray]:
        return {"weight": self.weight, "bias": self.bias}

    def out_length(self, length: int) -> int:
        return (length - self.weight.shape[1]) // self.stride + 1

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        batch, length, chans = x.shape
        filters, kernel, _ = self.weight.shape
        n_out = (length - kernel) // self.stride + 1
        if n_out < 1:
            raise InvalidInputError("input shorter than convolution kernel")
        x = np.ascontiguousarray(x)
        sb, sl, sc = x.strides
        windows = as_strided(x, (batch, n_out, kernel, chans), (sb, self.stride * sl, sl, sc))
        y = np.tensordot(windows, self.weight, axes=([2, 3], [1, 2])) + self.bias
        return y, (x.shape, windows)

    def backward(self, cache: tuple, dy: np.ndarray, want_params: bool) -> tuple[np.ndarray, dict | None]:
        (batch, length, chans), windows = cache
        filters, kernel, _ = self.weight.shape
        n_out = dy.shape[1]
        dx = np.zeros((batch, length, chans))
        for k in range(kernel):
            dx[:, k : k + n_out * self.stride : self.stride, :] += dy @ self.weight[:, k, :]
        grads = None
        if want_params:
            dw = np.tensordot(dy, windows, axes=([0, 1], [0, 1]))  # (filters, kernel, in_ch)
            grads = {"weight": dw, "bias": dy.sum(axis=(0, 1))}
        return dx, grads


class ReLU:
    frozen = True

    def spec(self) -> dict:
        return {"type": "relu"}

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # subgradient at 0 taken as 0: the mask is strict
        return np.maximum(x, 0.0), x > 0.0

    def backward(self, cache: np.ndarray, dy: np.ndarray, want_params: bool) -> tuple[np.ndarray, None]:
        return dy * cache, None


class MaxPool1D:
    frozen = True

    def __init__(self, width: int):
        self.width = int(width)

    def spec(self) -> dict:
        return {"type": "maxpool1d", "width": self.width}

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        batch, length, chans = x.shape
        n_out = length // self.width
        if n_out < 1:
            raise InvalidInputError("input shorter than pooling window")
        trimmed = x[:, : n_out * self.width, :].reshape(batch, n_out, self.width, chans)
        idx = trimmed.argmax(axis=2)  # first maximum wins ties
        y = np.take_along_axis(trimmed, idx[:, :, None, :], axis=2)[:, :, 0, :]
        return y, (x.shape, idx)

    def backward(self, cache: tuple, dy: np.ndarray, want_params: bool) -> tuple[np.ndarray, None]:
        (batch, length, chans), idx = cache
        n_out = idx.shape[1]
        dblocks = np.zeros((batch, n_out, self.width, chans))
        np.put_along_axis(dblocks, idx[:, :, None, :], dy[:, :, None, :], axis=2)
        dx = np.zeros((batch, length, chans))
        dx[:, : n_out * self.width, :] = dblocks.reshape(batch, n_out * self.width, chans)
        return dx, None


class Flatten:
    frozen = True

    def spec(self) -> dict:
        return {"type": "flatten"}

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache: tuple, dy: np.ndarray, want_params: bool) -> tuple[np.ndarray, None]:
        return dy.reshape(cache), None


class Dense:
    def __init__(self, weight: np.ndarray, bias: np.ndarray, frozen: bool = False):
        self.weight = np.asarray(weight, dtype=np.float64)  # (in, out)
        self.bias = np.asarray(bias, dtype=np.float64)  # (out,)
        self.frozen = frozen

    def spec(self) -> dict:
        return {"type": "dense", "frozen": self.frozen}

    def params(self) -> dict[str, np.ndarray]:
        return {"weight": self.weight, "bias": self.bias}

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return x @ self.weight + self.bias, x

    def backward(self, cache: np.ndarray, dy: np.ndarray, want_params: bool) -> tuple[np.ndarray, dict | None]:
        dx = dy @ self.weight.T
        grads = {"weight": cache.T @ dy, "bias": dy.sum(axis=0)} if want_params else None
        return dx, grads


_LAYER_KINDS = {"conv1d": Conv1D, "relu": ReLU, "maxpool1d": MaxPool1D, "flatten": Flatten, "dense": Dense}


class VictimModel:
    """A differentiable classifier over fixed-length waveforms in [0, 1]."""

    def __init__(self, layers: list, input_dim: int, num_classes: int, arch: str = "custom",
                 seed: int | None = None, sample_rate: int = 16000):
        self.layers = layers
        self.input_dim = int(input_dim)
        self.num_classes = int(num_classes)
        self.arch = arch
        self.seed = seed
        self.sample_rate = int(sample_rate)

    # -- forward / backward ------------------------------------------------

    def _as_batch(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise InvalidInputError(f"expected input of length {self.input_dim}, got shape {x.shape}")
        return x, single

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        batch, _ = self._as_batch(x)
        h = batch[:, :, None]  # (batch, length, 1)
        caches = []
        for layer in self.layers:
            h, cache = layer.forward(h)
            caches.append(cache)
        return h, caches

    def backward_input(self, caches: list, dlogits: np.ndarray) -> np.ndarray:
        dh = dlogits
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dh, _ = layer.backward(cache, dh, want_params=False)
        return dh[:, :, 0]

    def backward_params(self, caches: list, dlogits: np.ndarray) -> list[dict | None]:
        dh = dlogits
        grads: list[dict | None] = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            want = bool(self.layers[i].params()) and not self.layers[i].frozen
            dh, g = self.layers[i].backward(caches[i], dh, want_params=want)
            grads[i] = g
        return grads

    def logits(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward_cached(x)
        return out[0] if np.asarray(x).ndim == 1 else out

    def predict(self, x: np.ndarray) -> int | np.ndarray:
        out = self.logits(x)
        if out.ndim == 1:
            return int(np.argmax(out))  # lowest index wins ties
        return np.argmax(out, axis=1)

    # -- parameters ----------------------------------------------------------

    def named_params(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params().items():
                out.append((f"layer{i}.{name}", arr))
        return out

    def parameter_vector(self) -> np.ndarray:
        arrays = [arr.ravel() for _, arr in self.named_params()]
        return np.concatenate(arrays) if arrays else np.zeros(0)


def forward_logits(model: VictimModel, x: np.ndarray) -> np.ndarray:
    return model.logits(x)


def predict(model: VictimModel, x: np.ndarray) -> int | np.ndarray:
    return model.predict(x)


def input_gradient(model: VictimModel, x: np.ndarray, scalar_head: Head) -> np.ndarray:
    """Exact reverse-mode gradient of scalar_head(logits) w.r.t. the input.

    scalar_head maps a logit vector (C,) to (value, dvalue/dlogits).
    """
    logits, caches = model.forward_cached(x)
    _, dlogits = scalar_head(logits[0])
    return model.backward_input(caches, np.asarray(dlogits, dtype=np.float64)[None, :])[0]


def logit_head(index: int) -> Head:
    def head(logits: np.ndarray) -> tuple[float, np.ndarray]:
        grad = np.zeros_like(logits)
        grad[index] = 1.0
        return float(logits[index]), grad

    return head


def softmax(z: np.ndarray) -> np.ndarray:
    zm = z - z.max(axis=-1, keepdims=True)
    e = np.exp(zm)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_head(ref: int) -> Head:
    """Negative log-softmax probability of class ref."""

    def head(logits: np.ndarray) -> tuple[float, np.ndarray]:
        p = softmax(logits)
        grad = p.copy()
        grad[ref] -= 1.0
        value = float(-np.log(max(p[ref], 1e-300)))
        return value, grad

    return head


# -- registry ----------------------------------------------------------------


def _he_init(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    return _f32_exact(rng.standard_normal(shape) * np.sqrt(2.0 / fan_in))


def _bandpass_filterbank(filters: int, kernel: int, sample_rate: int) -> np.ndarray:
    # log-spaced band-pass filters between ~300 Hz and 0.45*sr, hamming windowed
    centers = np.geomspace(300.0 / sample_rate, 0.45, filters)
    n = np.arange(kernel) - (kernel - 1) / 2.0
    window = np.hamming(kernel)
    bank = np.stack([window * np.sin(2.0 * np.pi * fc * n) for fc in centers])
    bank /= np.linalg.norm(bank, axis=1, keepdims=True)
    return _f32_exact(bank[:, :, None])  # (filters, kernel, 1)


def _build_cnn(input_dim: int, num_classes: int, seed: int, sample_rate: int, gamma_front: bool) -> list:
    rng = np.random.default_rng(seed)
    if gamma_front:
        conv1 = Conv1D(_bandpass_filterbank(8, 64, sample_rate), np.zeros(8), stride=8, frozen=True)
    else:
        conv1 = Conv1D(_he_init(rng, (8, 32, 1), 32), np.zeros(8), stride=8)
    length = conv1.out_length(input_dim) // 4
    conv2 = Conv1D(_he_init(rng, (16, 16, 8), 16 * 8), np.zeros(16), stride=2)
    length = conv2.out_length(length) // 4
    if length < 1:
        raise InvalidInputError(f"input dimension {input_dim} too small for this architecture")
    flat = 16 * length
    layers = [
        conv1, ReLU(), MaxPool1D(4),
        conv2, ReLU(), MaxPool1D(4),
        Flatten(),
        Dense(_he_init(rng, (flat, 32), flat), np.zeros(32)), ReLU(),
        Dense(_he_init(rng, (32, num_classes), 32), np.zeros(num_classes)),
    ]
    return layers


def _build_linear(input_dim: int, num_classes: int, seed: int, sample_rate: int) -> list:
    rng = np.random.default_rng(seed)
    return [Flatten(), Dense(_f32_exact(rng.standard_normal((input_dim, num_classes)) / np.sqrt(input_dim)),
                             np.zeros(num_classes))]


ARCHITECTURES = ("rand-cnn", "gamma-cnn", "linear")


def build_victim(arch: str, input_dim: int, num_classes: int, seed: int = 0,
                 sample_rate: int = 16000) -> VictimModel:
    if num_classes < 2:
        raise InvalidInputError("victim needs at least 2 classes")
    if arch == "rand-cnn":
        layers = _build_cnn(input_dim, num_classes, seed, sample_rate, gamma_front=False)
    elif arch == "gamma-cnn":
        layers = _build_cnn(input_dim, num_classes, seed, sample_rate, gamma_front=True)
    elif arch == "linear":
        layers = _build_linear(input_dim, num_classes, seed, sample_rate)
    else:
        raise InvalidInputError(f"unknown architecture {arch!r}; choose from {ARCHITECTURES}")
    return VictimModel(layers, input_dim, num_classes, arch=arch, seed=seed, sample_rate=sample_rate)


def linear_victim_from_params(weight: np.ndarray, bias: np.ndarray) -> VictimModel:
    """Linear model with explicit (d, C) weights, for closed-form oracles."""
    weight = np.asarray(weight, dtype=np.float64)
    return VictimModel([Flatten(), Dense(weight, np.asarray(bias, dtype=np.float64))],
                       input_dim=weight.shape[0], num_classes=weight.shape[1], arch="linear")


# -- checkpoints ---------------------------------------------------------------


def save_model(model: VictimModel, path: str | Path) -> None:
    manifest = {
        "kind": "victim-model",
        "format": 1,
        "arch": model.arch,
        "input_dim": model.input_dim,
        "num_classes": model.num_classes,
        "sample_rate": model.sample_rate,
        "seed": model.seed,
        "layers": [layer.spec() for layer in model.layers],
    }
    blobs = {name: arr for name, arr in model.named_params()}
    write_container(path, manifest, blobs)


def load_model(path: str | Path) -> VictimModel:
    manifest, blobs = read_container(path)
    if manifest.get("kind") != "victim-model":
        raise FormatError(f"not a model checkpoint: {path}")
    layers = []
    for i, spec in enumerate(manifest["layers"]):
        kind = spec["type"]
        if kind not in _LAYER_KINDS:
            raise FormatError(f"unknown layer type {kind!r}")
        if kind == "conv1d":
            layers.append(Conv1D(blobs[f"layer{i}.weight"], blobs[f"layer{i}.bias"],
                                 stride=spec["stride"], frozen=spec["frozen"]))
        elif kind == "dense":
            layers.append(Dense(blobs[f"layer{i}.weight"], blobs[f"layer{i}.bias"], frozen=spec["frozen"]))
        elif kind == "maxpool1d":
            layers.append(MaxPool1D(spec["width"]))
        elif kind == "relu":
            layers.append(ReLU())
        else:
            layers.append(Flatten())
    return VictimModel(layers, manifest["input_dim"], manifest["num_classes"], arch=manifest["arch"],
                       seed=manifest.get("seed"), sample_rate=manifest.get("sample_rate", 16000))


# -- training ------------------------------------------------------------------


def accuracy(model: VictimModel, x: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(model.predict(x) == y))


def train(model: VictimModel, dataset, epochs: int = 20, *, lr: float = 1e-3,
          batch_size: int = 32, seed: int = 0) -> dict[str, list[float]]:
    """Cross-entropy training with Adam; mutates the model in place.

    Frozen layers are never updated. Returns per-epoch accuracy history.
    """
    x_train, y_train = dataset.arrays("train")
    if x_train.shape[0] == 0:
        raise InvalidInputError("empty training set")
    if y_train.min() < 0 or y_train.max() >= model.num_classes:
        raise InvalidInputError("labels out of range for this model")
    x_val, y_val = dataset.arrays("val")

    rng = np.random.default_rng(seed)
    states: dict[tuple[int, str], AdamState] = {}
    history: dict[str, list[float]] = {"train_accuracy": [], "val_accuracy": []}
    n = x_train.shape[0]
    onehot = np.eye(model.num_classes)[y_train]

    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            logits, caches = model.forward_cached(x_train[batch])
            dlogits = (softmax(logits) - onehot[batch]) / batch.size
            grads = model.backward_params(caches, dlogits)
            for i, layer_grads in enumerate(grads):
                if not layer_grads:
                    continue
                for pname, g in layer_grads.items():
                    key = (i, pname)
                    state = states.get(key, AdamState(lr=lr))
                    delta, states[key] = adam_update(state, g)
                    layer = model.layers[i]
                    setattr(layer, pname, layer.params()[pname] + delta)
        history["train_accuracy"].append(accuracy(model, x_train, y_train))
        if x_val.shape[0]:
            history["val_accuracy"].append(accuracy(model, x_val, y_val))
    return history
