"""Binary model files.

Layout (all integers little-endian ``u32``, all reals little-endian ``f64``)::

    b"TTCM"                       magic
    version                       currently 1
    D                             number of dimensions
    n_param n_state n_action      block sizes, summing to D
    D x (label_len, label utf-8, lower, upper, n_points)
    D x (r0, n, r1, r0*n*r1 reals in C order)
    meta_len, meta                UTF-8 JSON object (sorted keys), may be "{}"

Floats are written verbatim, so a load/save round trip is bit-exact.
"""

from __future__ import annotations

import io
import json
import os
import struct
from typing import Any

import numpy as np

from .grid import DomainGrid, Grid
from .tt import TensorTrain

MAGIC = b"TTCM"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def _u32(buf, *vals):
    buf.write(struct.pack("<" + "I" * len(vals), *vals))


def dumps(tt: TensorTrain, grids: DomainGrid, metadata: dict[str, Any] | None = None) -> bytes:
    if tt.shape != grids.sizes:
        raise ValueError(f"train shape {tt.shape} does not match grid sizes {grids.sizes}")
    buf = io.BytesIO()
    buf.write(MAGIC)
    _u32(buf, VERSION, tt.ndim, grids.n_param, grids.n_state, grids.n_action)
    for g in grids:
        label = g.label.encode("utf-8")
        _u32(buf, len(label))
        buf.write(label)
        buf.write(struct.pack("<dd", g.lower, g.upper))
        _u32(buf, g.n_points)
    for c in tt.cores:
        _u32(buf, *c.shape)
        buf.write(np.ascontiguousarray(c, dtype="<f8").tobytes())
    meta = json.dumps(metadata or {}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    _u32(buf, len(meta))
    buf.write(meta)
    return buf.getvalue()


def loads(data: bytes) -> tuple[TensorTrain, DomainGrid, dict[str, Any]]:
    view = memoryview(data)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise ModelFormatError("truncated model file")
        out = view[pos : pos + n]
        pos += n
        return out

    def u32(count=1):
        vals = struct.unpack("<" + "I" * count, take(4 * count))
        return vals if count > 1 else vals[0]

    if bytes(take(4)) != MAGIC:
        raise ModelFormatError("not a TTCM model file")
    version, d, n_param, n_state, n_action = u32(5)
    if version != VERSION:
        raise ModelFormatError(f"unsupported format version {version}")
    grids = []
    for _ in range(d):
        label = bytes(take(u32())).decode("utf-8")
        lower, upper = struct.unpack("<dd", take(16))
        grids.append(Grid(label, lower, upper, u32()))
    cores = []
    for _ in range(d):
        shape = u32(3)
        n = shape[0] * shape[1] * shape[2]
        cores.append(np.frombuffer(take(8 * n), dtype="<f8").astype(np.float64).reshape(shape))
    meta = json.loads(bytes(take(u32())).decode("utf-8"))
    if pos != len(view):
        raise ModelFormatError("trailing bytes after metadata block")
    return TensorTrain(cores), DomainGrid(grids, n_param, n_state, n_action), meta


def save(path: str | os.PathLike, tt: TensorTrain, grids: DomainGrid, metadata: dict | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(tt, grids, metadata))


def load(path: str | os.PathLike) -> tuple[TensorTrain, DomainGrid, dict[str, Any]]:
    with open(path, "rb") as fh:
        return loads(fh.read())
