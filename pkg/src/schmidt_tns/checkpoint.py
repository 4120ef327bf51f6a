"""Binary checkpoints of Schmidt TNS.

Layout (all integers little-endian)::

    b"STNS"  | u32 version | u32 len + UTF-8 JSON descriptor
    per tensor: u32 len + UTF-8 name | u8 kind | u32 rank | u64 shape[rank]
                | float64 payload (little-endian, row-major)

The descriptor holds the architecture, the number of tensors and any extra
metadata (the run configuration, for instance).
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from .schmidt_state import Architecture, SchmidtTNS, _wrap
from .tensor_core import FREE, SQUARED, UNITARY, unitarity_error

__all__ = ["CheckpointError", "save_checkpoint", "load_checkpoint", "FORMAT_VERSION"]

MAGIC = b"STNS"
FORMAT_VERSION = 1
_KIND_CODES = {UNITARY: 0, SQUARED: 1, FREE: 2}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


class CheckpointError(ValueError):
    """Unreadable, corrupted or invalid checkpoint."""


def _pack_str(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def save_checkpoint(state: SchmidtTNS, path, metadata: dict | None = None) -> None:
    desc = {"architecture": state.arch.describe(), "n_tensors": len(state.params)}
    if metadata:
        desc["metadata"] = metadata
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    buf.write(_pack_str(json.dumps(desc, sort_keys=True)))
    for name, p in state.params.items():
        data = np.ascontiguousarray(p.raw.data, dtype="<f8")
        buf.write(_pack_str(name))
        buf.write(struct.pack("<BI", _KIND_CODES[p.kind], data.ndim))
        buf.write(struct.pack(f"<{data.ndim}Q", *data.shape))
        buf.write(data.tobytes())
    Path(path).write_bytes(buf.getvalue())


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(
                f"corrupted checkpoint: needed {n} bytes at offset {self.pos}, "
                f"only {len(self.data) - self.pos} left"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (n,) = self.unpack("<I")
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as err:
            raise CheckpointError(f"corrupted checkpoint: bad UTF-8 ({err})") from None


def load_checkpoint(path, with_metadata: bool = False):
    """Read a checkpoint and re-validate every invariant of the state."""
    rd = _Reader(Path(path).read_bytes())
    if rd.take(4) != MAGIC:
        raise CheckpointError("not a checkpoint: bad magic bytes")
    (version,) = rd.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})")
    try:
        desc = json.loads(rd.string())
        arch = Architecture.from_description(desc["architecture"])
        n_tensors = int(desc["n_tensors"])
    except (KeyError, TypeError, ValueError) as err:
        if isinstance(err, CheckpointError):
            raise
        raise CheckpointError(f"corrupted checkpoint descriptor: {err}") from None
    specs = arch.param_specs()
    arrays = {}
    for _ in range(n_tensors):
        name = rd.string()
        code, rank = rd.unpack("<BI")
        if code not in _KIND_NAMES:
            raise CheckpointError(f"corrupted checkpoint: unknown kind byte {code} on {name}")
        shape = rd.unpack(f"<{rank}Q")
        count = int(np.prod(shape)) if rank else 1
        payload = np.frombuffer(rd.take(8 * count), dtype="<f8").reshape(shape)
        if name not in specs:
            raise CheckpointError(f"invariant violation: unexpected tensor {name}")
        kind, expected = specs[name]
        if _KIND_NAMES[code] != kind or tuple(shape) != expected:
            raise CheckpointError(
                f"invariant violation: tensor {name} is {_KIND_NAMES[code]} {tuple(shape)}, "
                f"expected {kind} {expected}"
            )
        if not np.all(np.isfinite(payload)):
            raise CheckpointError(f"invariant violation: non-finite entries in {name}")
        if kind == UNITARY:
            d = int(np.sqrt(payload.size))
            err = unitarity_error(payload.reshape(d, d))
            if err >= 1e-12:
                raise CheckpointError(
                    f"invariant violation: tensor {name} is not orthogonal (error {err:.3g})"
                )
        arrays[name] = payload.astype(np.float64)
    if rd.pos != len(rd.data):
        raise CheckpointError(f"corrupted checkpoint: {len(rd.data) - rd.pos} trailing bytes")
    missing = sorted(set(specs) - set(arrays))
    if missing:
        raise CheckpointError(f"invariant violation: missing tensors {missing}")
    state = SchmidtTNS(arch, _wrap(arch, arrays))
    if with_metadata:
        return state, desc.get("metadata", {})
    return state
