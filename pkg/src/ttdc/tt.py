"""Tensor-train storage and the core-level operations built on it.

A tensor train over ``D`` dimensions is a list of third-order cores, core
``k`` of shape ``(r_{k-1}, n_k, r_k)`` with ``r_0 = r_D = 1``.  An element is
the product of the matrix slices ``core_k[:, i_k, :]`` taken left to right.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import FullyContractedError, ShapeError
from .grid import DomainGrid


class TensorTrain:
    """Immutable tensor train.  Cores are stored as read-only float64 arrays."""

    __slots__ = ("_cores",)

    def __init__(self, cores: Iterable[np.ndarray]):
        cs = []
        for k, c in enumerate(cores):
            c = np.array(c, dtype=np.float64, order="C")
            if c.ndim != 3:
                raise ShapeError(f"core {k} must be 3-D, got shape {c.shape}")
            c.setflags(write=False)
            cs.append(c)
        if not cs:
            raise ShapeError("a tensor train needs at least one core")
        if cs[0].shape[0] != 1 or cs[-1].shape[2] != 1:
            raise ShapeError("boundary ranks must be 1")
        for k in range(len(cs) - 1):
            if cs[k].shape[2] != cs[k + 1].shape[0]:
                raise ShapeError(
                    f"rank mismatch between core {k} {cs[k].shape} and core {k + 1} {cs[k + 1].shape}"
                )
        self._cores = tuple(cs)

    @classmethod
    def constant(cls, shape: Sequence[int], value: float) -> "TensorTrain":
        cores = [np.ones((1, n, 1)) for n in shape]
        cores[0] = cores[0] * value
        return cls(cores)

    @classmethod
    def random(cls, shape: Sequence[int], rank, rng=None) -> "TensorTrain":
        """Gaussian cores; ``rank`` is an int or the list of internal ranks."""
        rng = np.random.default_rng(rng)
        d = len(shape)
        if np.isscalar(rank):
            rank = [rank] * (d - 1)
        r = [1, *rank, 1]
        return cls(rng.standard_normal((r[k], shape[k], r[k + 1])) for k in range(d))

    @property
    def cores(self) -> tuple:
        return self._cores

    @property
    def ndim(self) -> int:
        return len(self._cores)

    @property
    def shape(self) -> tuple:
        return tuple(c.shape[1] for c in self._cores)

    @property
    def ranks(self) -> tuple:
        return (1,) + tuple(c.shape[2] for c in self._cores)

    @property
    def size(self) -> int:
        """Number of stored floats."""
        return sum(c.size for c in self._cores)

    def full(self) -> np.ndarray:
        """Dense array; testing scale only."""
        out = self._cores[0].reshape(self.shape[0], -1)
        for c in self._cores[1:]:
            out = out @ c.reshape(c.shape[0], -1)
            out = out.reshape(-1, c.shape[2])
        return out.reshape(self.shape)

    def scaled(self, factor: float) -> "TensorTrain":
        cores = list(self._cores)
        cores[0] = cores[0] * factor
        return TensorTrain(cores)

    def __repr__(self):
        return f"TensorTrain(shape={self.shape}, ranks={self.ranks})"


def _as_index_batch(tt: TensorTrain, idx) -> tuple[np.ndarray, bool]:
    arr = np.asarray(idx)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != tt.ndim:
        raise ShapeError(f"expected {tt.ndim} indices per row, got {arr.shape[1]}")
    if not np.issubdtype(arr.dtype, np.integer):
        if np.any(arr != np.round(arr)):
            raise IndexError("indices must be integers")
        arr = arr.astype(np.int64)
    n = np.array(tt.shape)
    if np.any(arr < 0) or np.any(arr >= n):
        bad = np.argwhere((arr < 0) | (arr >= n))[0]
        raise IndexError(
            f"index {int(arr[bad[0], bad[1]])} out of range for dimension {bad[1]} of size {n[bad[1]]}"
        )
    return arr, single


def chain_indices(cores: Sequence[np.ndarray], idx: np.ndarray, left: np.ndarray | None = None) -> np.ndarray:
    """Row vectors ``left @ core_0[:, i_0, :] @ ...`` for a batch of indices.

    ``idx`` has shape ``(B, len(cores))``; ``left`` is ``(B, r_0)`` or None
    (meaning a leading rank of one).  Returns ``(B, r_last)``.
    """
    b = idx.shape[0]
    v = np.ones((b, 1)) if left is None else left
    for k, core in enumerate(cores):
        v = rows_times_slices(v, core, idx[:, k])
    return v


def rows_times_slices(v: np.ndarray, core: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """``v[b] @ core[:, idx[b], :]`` for every row ``b``.

    Large batches are grouped by slice index so each group is one matmul.
    """
    b = v.shape[0]
    n = core.shape[1]
    if b < 8 * n:
        return np.einsum("br,rbs->bs", v, core[:, idx, :])
    g = core.transpose(1, 0, 2)
    out = np.empty((b, core.shape[2]))
    order = np.argsort(idx, kind="stable")
    bounds = np.searchsorted(idx[order], np.arange(n + 1))
    for k in range(n):
        sel = order[bounds[k] : bounds[k + 1]]
        if sel.size:
            out[sel] = v[sel] @ g[k]
    return out


def interpolated_slices(core: np.ndarray, grid, x) -> np.ndarray:
    """Linearly interpolated matrix slices, shape ``(B, r_0, r_1)``."""
    i, t = grid.locate(np.atleast_1d(x))
    g = core.transpose(1, 0, 2)
    if grid.n_points == 1:
        return g[i]
    t = t[:, None, None]
    return (1.0 - t) * g[i] + t * g[i + 1]


def chain_points(cores: Sequence[np.ndarray], grids: Sequence, points: np.ndarray, left: np.ndarray | None = None) -> np.ndarray:
    """Continuous counterpart of :func:`chain_indices`."""
    b = points.shape[0]
    v = np.ones((b, 1)) if left is None else left
    for k, (core, grid) in enumerate(zip(cores, grids)):
        i, t = grid.locate(points[:, k])
        if grid.n_points == 1:
            v = v @ core[:, 0, :]
            continue
        t = t[:, None]
        v = (1.0 - t) * rows_times_slices(v, core, i) + t * rows_times_slices(v, core, i + 1)
    return v


def tt_eval_index(tt: TensorTrain, idx):
    """Value at a multi-index (or a ``(B, D)`` batch of them)."""
    arr, single = _as_index_batch(tt, idx)
    vals = chain_indices(tt.cores, arr)[:, 0]
    return float(vals[0]) if single else vals


def tt_eval_continuous(tt: TensorTrain, grids: DomainGrid | Sequence, point):
    """Value at a real point by linear interpolation between core slices.

    Coordinates outside ``[lower, upper]`` raise :class:`DomainError`;
    callers clamp first.
    """
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    grids = tuple(grids)
    if pts.shape[1] != tt.ndim or len(grids) != tt.ndim:
        raise ShapeError(f"expected {tt.ndim} coordinates and grids")
    for g, n in zip(grids, tt.shape):
        if g.n_points != n:
            raise ShapeError(f"grid {g.label!r} has {g.n_points} points but core has {n}")
    vals = chain_points(tt.cores, grids, pts)[:, 0]
    return float(vals[0]) if single else vals


def tt_slice(tt: TensorTrain, dim: int, idx: int) -> TensorTrain:
    """Fix dimension ``dim`` at ``idx``.

    The fixed matrix slice is folded into the right neighbour, or the left
    one when ``dim`` is last.  Slicing a one-dimensional train raises
    :class:`FullyContractedError` carrying the scalar.
    """
    d = tt.ndim
    if not 0 <= dim < d:
        raise IndexError(f"dimension {dim} out of range for {d}-D train")
    n = tt.shape[dim]
    if not 0 <= idx < n:
        raise IndexError(f"index {idx} out of range for dimension {dim} of size {n}")
    m = tt.cores[dim][:, idx, :]
    if d == 1:
        raise FullyContractedError(m[0, 0])
    cores = list(tt.cores)
    if dim < d - 1:
        cores[dim + 1] = np.einsum("ab,bis->ais", m, cores[dim + 1])
    else:
        cores[dim - 1] = np.einsum("ria,ab->rib", cores[dim - 1], m)
    del cores[dim]
    return TensorTrain(cores)


def weighted_left_vector(cores: Sequence[np.ndarray], weights: Sequence) -> np.ndarray:
    """Row vector ``prod_k sum_j w_k[j] core_k[:, j, :]`` over the given cores."""
    v = np.ones(1)
    for k, (core, w) in enumerate(zip(cores, weights)):
        w = np.asarray(w, dtype=float)
        if w.ndim != 1 or w.shape[0] != core.shape[1]:
            raise ShapeError(f"weight vector {k} has shape {w.shape}, mode size is {core.shape[1]}")
        v = v @ np.einsum("j,rjs->rs", w, core)
    return v


def tt_contract_weighted(tt: TensorTrain, weights: Sequence) -> TensorTrain:
    """Sum out the leading ``len(weights)`` dimensions against weight vectors.

    Each contracted core collapses to ``sum_j w[j] core[:, j, :]``; the
    product of these matrices is absorbed into the first remaining core.
    """
    k = len(weights)
    if k > tt.ndim:
        raise ShapeError(f"{k} weight vectors for a {tt.ndim}-D train")
    v = weighted_left_vector(tt.cores[:k], weights)
    if k == tt.ndim:
        raise FullyContractedError(v[0])
    if k == 0:
        return tt
    rest = list(tt.cores[k:])
    rest[0] = np.einsum("r,ris->is", v, rest[0])[None]
    return TensorTrain(rest)


def _truncation_rank(s: np.ndarray, delta: float, r_max: int | None) -> int:
    # smallest r whose discarded tail has Frobenius norm <= delta
    tail = np.sqrt(np.cumsum((s**2)[::-1]))[::-1]
    r = int(np.sum(tail > delta))
    r = max(r, 1)
    if r_max is not None:
        r = min(r, r_max)
    return r


def tt_from_full(full: np.ndarray, eps: float = 1e-12, r_max: int | None = None) -> TensorTrain:
    """TT-SVD: Frobenius error at most ``eps * ||full||`` (without ``r_max``)."""
    a = np.asarray(full, dtype=float)
    shape = a.shape
    d = len(shape)
    if d == 0:
        raise ShapeError("need at least one dimension")
    if d == 1:
        return TensorTrain([a.reshape(1, -1, 1)])
    delta = eps / np.sqrt(d - 1) * np.linalg.norm(a)
    cores = []
    r = 1
    c = a.reshape(shape[0], -1)
    for k in range(d - 1):
        c = c.reshape(r * shape[k], -1)
        u, s, vt = np.linalg.svd(c, full_matrices=False)
        rk = _truncation_rank(s, delta, r_max)
        cores.append(u[:, :rk].reshape(r, shape[k], rk))
        c = s[:rk, None] * vt[:rk]
        r = rk
    cores.append(c.reshape(r, shape[-1], 1))
    return TensorTrain(cores)


def _orthogonalize_right(cores: list) -> list:
    """Right-to-left QR sweep; every core but the first becomes row-orthonormal."""
    for k in range(len(cores) - 1, 0, -1):
        r0, n, r1 = cores[k].shape
        q, rr = np.linalg.qr(cores[k].reshape(r0, n * r1).T)
        cores[k] = q.T.reshape(-1, n, r1)
        cores[k - 1] = np.einsum("ris,st->rit", cores[k - 1], rr.T)
    return cores


def tt_round(tt: TensorTrain, eps: float, r_max: int | None = None) -> TensorTrain:
    """Recompress; the result is within ``eps * ||tt||`` in Frobenius norm."""
    d = tt.ndim
    if d == 1:
        return tt
    cores = _orthogonalize_right(list(tt.cores))
    delta = eps / np.sqrt(d - 1) * np.linalg.norm(cores[0])
    for k in range(d - 1):
        r0, n, r1 = cores[k].shape
        u, s, vt = np.linalg.svd(cores[k].reshape(r0 * n, r1), full_matrices=False)
        rk = _truncation_rank(s, delta, r_max) if eps > 0 or r_max is not None else len(s)
        cores[k] = u[:, :rk].reshape(r0, n, rk)
        cores[k + 1] = np.einsum("ab,bis->ais", s[:rk, None] * vt[:rk], cores[k + 1])
    return TensorTrain(cores)


def tt_add(a: TensorTrain, b: TensorTrain) -> TensorTrain:
    """Elementwise sum; ranks add."""
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    d = a.ndim
    if d == 1:
        return TensorTrain([a.cores[0] + b.cores[0]])
    cores = []
    for k, (x, y) in enumerate(zip(a.cores, b.cores)):
        if k == 0:
            cores.append(np.concatenate([x, y], axis=2))
        elif k == d - 1:
            cores.append(np.concatenate([x, y], axis=0))
        else:
            z = np.zeros((x.shape[0] + y.shape[0], x.shape[1], x.shape[2] + y.shape[2]))
            z[: x.shape[0], :, : x.shape[2]] = x
            z[x.shape[0] :, :, x.shape[2] :] = y
            cores.append(z)
    return TensorTrain(cores)
