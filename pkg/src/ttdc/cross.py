"""Adaptive TT-cross approximation of black-box functions on a grid.

The function is only ever evaluated on fibers ``I_{<k} x {0..n_k-1} x J_{>k}``
built from left/right pivot sets.  Alternating left-to-right and
right-to-left half sweeps refresh one side of the pivots each time: the
fiber matrix is enriched with ``kick_rank`` random pivots, truncated by SVD,
and new pivots are picked by maxvol on the leading singular vectors.  Cores
are kept in interpolative form, so the train reproduces the function
exactly on the pivot fibers of its last (raw) core.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import qr as pivoted_qr

from .errors import CrossEvaluationError
from .grid import DomainGrid
from .tt import TensorTrain, _truncation_rank, tt_eval_index

log = logging.getLogger(__name__)

BatchFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CrossConfig:
    eps: float = 1e-3
    r_max: int = 100
    max_sweeps: int = 10
    kick_rank: int = 2
    validation_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.r_max < 1 or self.max_sweeps < 1 or self.kick_rank < 1:
            raise ValueError("r_max, max_sweeps and kick_rank must be >= 1")
        if self.validation_samples < 1:
            raise ValueError("validation_samples must be >= 1")


@dataclass
class CrossResult:
    tt: TensorTrain
    error: float
    converged: bool
    n_evals: int
    sweeps: int
    pivots: np.ndarray = field(repr=False)
    history: list = field(default_factory=list, repr=False)
    index_sets: tuple = field(default=(), repr=False)

    @property
    def max_rank(self) -> int:
        return max(self.tt.ranks)


class NotConvergedWarning(RuntimeWarning):
    pass


def maxvol(a: np.ndarray, tol: float = 1.01, max_iters: int = 200) -> np.ndarray:
    """Rows of a tall ``(m, r)`` matrix spanning a quasi-maximal-volume submatrix.

    Starts from column-pivoted QR of ``a.T`` and swaps rows while some
    coefficient of ``a @ inv(a[idx])`` exceeds ``tol`` in modulus.
    """
    m, r = a.shape
    if m <= r:
        return np.arange(m)
    _, _, piv = pivoted_qr(a.T, pivoting=True, mode="economic")
    idx = piv[:r].copy()
    try:
        b = np.linalg.solve(a[idx].T, a.T).T
    except np.linalg.LinAlgError:
        return idx
    for _ in range(max_iters):
        i, j = np.unravel_index(np.argmax(np.abs(b)), b.shape)
        if abs(b[i, j]) <= tol:
            break
        idx[j] = i
        row = b[i].copy()
        row[j] -= 1.0
        b -= np.outer(b[:, j], row / b[i, j])
    return idx


def on_grid(fn: Callable[[np.ndarray], np.ndarray], grids: DomainGrid) -> BatchFunction:
    """Adapt a function of real points ``(B, D)`` to grid multi-indices."""

    def f(idx):
        return fn(grids.index_to_point(idx))

    return f


class _CountingFunction:
    def __init__(self, f: BatchFunction):
        self.f = f
        self.count = 0

    def __call__(self, idx: np.ndarray) -> np.ndarray:
        vals = np.asarray(self.f(idx), dtype=float).reshape(-1)
        if vals.shape[0] != idx.shape[0]:
            raise ValueError(f"function returned {vals.shape[0]} values for {idx.shape[0]} indices")
        bad = ~np.isfinite(vals)
        if bad.any():
            k = int(np.argmax(bad))
            raise CrossEvaluationError(idx[k], vals[k])
        self.count += idx.shape[0]
        return vals


def _unique_rows(rows: np.ndarray) -> np.ndarray:
    _, first = np.unique(rows, axis=0, return_index=True)
    return rows[np.sort(first)]


def _fiber_indices(left: np.ndarray, n: int, right: np.ndarray) -> np.ndarray:
    a, b = left.shape[0], right.shape[0]
    lpart = np.broadcast_to(left[:, None, None, :], (a, n, b, left.shape[1]))
    mid = np.broadcast_to(np.arange(n)[None, :, None, None], (a, n, b, 1))
    rpart = np.broadcast_to(right[None, None, :, :], (a, n, b, right.shape[1]))
    return np.concatenate([lpart, mid, rpart], axis=3).reshape(a * n * b, -1)


def _interpolative(u: np.ndarray, piv: np.ndarray) -> np.ndarray:
    return np.linalg.solve(u[piv].T, u.T).T


def cross_approximate(
    f: BatchFunction,
    grids: DomainGrid | Sequence[int],
    cfg: CrossConfig = CrossConfig(),
    init: CrossResult | None = None,
) -> CrossResult:
    """Build a tensor train of ``f`` from selected fiber evaluations.

    ``f`` maps an integer array of multi-indices ``(B, D)`` to ``B`` values
    and must be pure.  The relative RMS error on ``cfg.validation_samples``
    random indices is monitored after every half sweep; iteration stops as
    soon as it is ``<= cfg.eps``.  Otherwise the best iterate is returned
    with ``converged=False`` and a :class:`NotConvergedWarning`.

    Passing the result of an earlier run on the same grid as ``init``
    starts from its right index sets instead of a single random index,
    which saves sweeps when ``f`` changed only a little.
    """
    shape = tuple(grids.sizes) if isinstance(grids, DomainGrid) else tuple(int(n) for n in grids)
    d = len(shape)
    fc = _CountingFunction(f)
    rng = np.random.default_rng(cfg.seed)
    nn = np.array(shape)

    if d == 1:
        idx = np.arange(shape[0])[:, None]
        vals = fc(idx)
        tt = TensorTrain([vals.reshape(1, -1, 1)])
        return CrossResult(tt, 0.0, True, fc.count, 0, idx)

    val_idx = rng.integers(0, nn, size=(cfg.validation_samples, d))
    val_f = fc(val_idx)
    val_norm = np.linalg.norm(val_f)

    def validation_error(tt):
        diff = np.linalg.norm(tt_eval_index(tt, val_idx) - val_f)
        return diff / val_norm if val_norm > 0 else diff / np.sqrt(len(val_f))

    tol = cfg.eps / np.sqrt(d)
    start = rng.integers(0, nn)
    left = [start[:k][None, :] for k in range(d + 1)]
    right = [start[k:][None, :] for k in range(d + 1)]
    if init is not None and init.index_sets and len(init.index_sets[1]) == d + 1:
        right = [r.copy() for r in init.index_sets[1]]
    cores: list = [None] * d

    best = None
    history = []
    prev_vals = None
    converged = False
    sweeps_done = 0

    def truncated_basis(mat):
        u, s, _ = np.linalg.svd(mat, full_matrices=False)
        r = _truncation_rank(s, tol * np.linalg.norm(s), cfg.r_max)
        return u[:, :r]

    for sweep in range(cfg.max_sweeps):
        sweeps_done = sweep + 1
        for direction in ("lr", "rl"):
            if direction == "lr":
                for k in range(d - 1):
                    extra = rng.integers(0, nn[k + 1 :], size=(cfg.kick_rank, d - k - 1))
                    r_aug = _unique_rows(np.concatenate([right[k + 1], extra]))
                    a, b = left[k].shape[0], r_aug.shape[0]
                    fib = fc(_fiber_indices(left[k], shape[k], r_aug)).reshape(a * shape[k], b)
                    u = truncated_basis(fib)
                    piv = maxvol(u)
                    left[k + 1] = np.concatenate(
                        [left[k][piv // shape[k]], (piv % shape[k])[:, None]], axis=1
                    )
                    cores[k] = _interpolative(u, piv).reshape(a, shape[k], -1)
                a = left[d - 1].shape[0]
                cores[d - 1] = fc(_fiber_indices(left[d - 1], shape[-1], right[d])).reshape(a, shape[-1], 1)
                pivots = _fiber_indices(left[d - 1], shape[-1], right[d])
            else:
                for k in range(d - 1, 0, -1):
                    extra = rng.integers(0, nn[:k], size=(cfg.kick_rank, k))
                    l_aug = _unique_rows(np.concatenate([left[k], extra]))
                    a, b = l_aug.shape[0], right[k + 1].shape[0]
                    fib = fc(_fiber_indices(l_aug, shape[k], right[k + 1])).reshape(a, shape[k] * b)
                    u = truncated_basis(fib.T)
                    piv = maxvol(u)
                    right[k] = np.concatenate(
                        [(piv // b)[:, None], right[k + 1][piv % b]], axis=1
                    )
                    cores[k] = _interpolative(u, piv).T.reshape(-1, shape[k], b)
                b = right[1].shape[0]
                cores[0] = fc(_fiber_indices(left[0], shape[0], right[1])).reshape(1, shape[0], b)
                pivots = _fiber_indices(left[0], shape[0], right[1])

            tt = TensorTrain(cores)
            err = validation_error(tt)
            vals = tt_eval_index(tt, val_idx)
            if prev_vals is None:
                change = np.inf
            else:
                denom = np.linalg.norm(vals)
                change = np.linalg.norm(vals - prev_vals) / denom if denom > 0 else np.linalg.norm(vals - prev_vals)
            prev_vals = vals
            history.append({"sweep": sweep + 1, "direction": direction, "max_rank": max(tt.ranks),
                            "val_err": err, "change": change, "evals": fc.count})
            log.info(
                "sweep=%d half=%s max_rank=%d val_err=%.3e change=%.3e evals=%d",
                sweep + 1, direction, max(tt.ranks), err, change, fc.count,
            )
            if best is None or err < best[1]:
                best = (tt, err, pivots, (list(left), list(right)))
            if err <= cfg.eps:
                converged = True
                break
        if converged:
            break

    tt, err, pivots, sets = best
    if not converged:
        warnings.warn(
            f"TT-cross stopped after {sweeps_done} sweeps with validation error {err:.3e} > eps={cfg.eps:.1e}",
            NotConvergedWarning,
            stacklevel=2,
        )
    return CrossResult(tt, float(err), converged, fc.count, sweeps_done, pivots, history, sets)
