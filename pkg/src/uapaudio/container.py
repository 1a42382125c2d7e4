"""Single-file artifact container: magic, canonical JSON manifest, f32 blobs.

Both model checkpoints and perturbation files use this layout:

    bytes 0..8    magic b"UAPC0001"
    bytes 8..12   manifest length (uint32, little endian)
    ...           manifest JSON (UTF-8, sorted keys, no whitespace)
    ...           named blobs, concatenated little-endian float32

The manifest's "blobs" entry records each blob's name and shape in storage
order, so files are bit-reproducible from the same arrays and manifest.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .exceptions import FormatError

MAGIC = b"UAPC0001"


def fmt_float(x: float) -> str:
    """Canonical float text: shortest repr, so parse -> re-emit is identity."""
    return repr(float(x))


def write_csv(path: str | Path, header: list[str], rows: list[list[str]]) -> None:
    """Write CSV with a fixed newline convention so output bytes are canonical."""
    lines = [",".join(header)] + [",".join(row) for row in rows]
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError(f"empty CSV: {path}")
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def canonical_json(obj: dict) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def write_container(path: str | Path, manifest: dict, blobs: dict[str, np.ndarray]) -> None:
    meta = dict(manifest)
    meta["blobs"] = [
        {"name": name, "shape": [int(n) for n in np.shape(arr)]} for name, arr in blobs.items()
    ]
    payload = canonical_json(meta)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(payload).to_bytes(4, "little"))
        fh.write(payload)
        for arr in blobs.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_container(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 4 or data[: len(MAGIC)] != MAGIC:
        raise FormatError(f"not an artifact container: {path}")
    length = int.from_bytes(data[len(MAGIC) : len(MAGIC) + 4], "little")
    offset = len(MAGIC) + 4
    try:
        manifest = json.loads(data[offset : offset + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt container manifest: {path}") from exc
    offset += length
    blobs: dict[str, np.ndarray] = {}
    for entry in manifest.get("blobs", []):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        flat = np.frombuffer(data[offset : offset + 4 * count], dtype="<f4")
        if flat.size != count:
            raise FormatError(f"truncated blob {entry['name']!r} in {path}")
        # parameters are stored f32 but all computation is float64
        blobs[entry["name"]] = flat.astype(np.float64).reshape(shape)
        offset += 4 * count
    if offset != len(data):
        raise FormatError(f"trailing bytes in container: {path}")
    return manifest, blobs
