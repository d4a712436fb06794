"""Flat binary checkpoint container plus JSON manifest.

Layout of ``checkpoint.bin`` (all integers little-endian)::

    magic   8 bytes  b"SUBACTCK"
    version u32
    count   u32
    count x entry:
        name_len u32, name utf-8 bytes
        ndim u32, ndim x u64 extents
        payload: prod(extents) x fp64 (little-endian)
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CompatibilityError, ParseError

MAGIC = b"SUBACTCK"
FORMAT_VERSION = 1


def config_hash(obj) -> str:
    """Stable sha256 over canonical JSON."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_container(path: Path, arrays: dict[str, np.ndarray]) -> None:
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(arrays))]
    for name in sorted(arrays):
        arr = np.asarray(arrays[name], dtype="<f8", order="C")
        raw = name.encode()
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_container(path: Path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC:
        raise ParseError(f"{path}: not a checkpoint container")
    pos = 8

    def take(fmt: str):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(blob):
            raise ParseError(f"{path}: truncated checkpoint at byte {pos}")
        vals = struct.unpack_from(fmt, blob, pos)
        pos += size
        return vals

    version, count = take("<II")
    if version != FORMAT_VERSION:
        raise CompatibilityError(f"{path}: checkpoint format {version}, expected {FORMAT_VERSION}")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (n,) = take("<I")
        name = bytes(take(f"<{n}s")[0]).decode()
        (ndim,) = take("<I")
        shape = take(f"<{ndim}Q") if ndim else ()
        size = int(np.prod(shape)) if ndim else 1
        if pos + 8 * size > len(blob):
            raise ParseError(f"{path}: truncated payload for {name!r}")
        out[name] = np.frombuffer(blob, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * size
    return out


def save_state(directory: Path, state: dict[str, np.ndarray], manifest: dict) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_container(directory / "checkpoint.bin", state)
    body = {"format_version": FORMAT_VERSION, **manifest}
    (directory / "manifest.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def load_state(directory: Path) -> tuple[dict[str, np.ndarray], dict]:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CompatibilityError(f"{directory}: manifest format {manifest.get('format_version')}")
    return read_container(directory / "checkpoint.bin"), manifest
