"""Sampling-based global optimization of functions stored as tensor trains.

Candidates are drawn one dimension at a time.  The weight of option ``i``
for the next dimension is the exact marginal of the *squared* function over
the remaining dimensions, obtained from the sampled prefix and right Gram
environments ``R_k = sum_i G_k[:, i, :] R_{k+1} G_k[:, i, :]^T``.  Squaring
keeps the weights nonnegative for signed functions such as advantages.

For maximization the function is first shifted by a pilot estimate of its
minimum (an additive constant costs one extra rank), so that large squared
values mean large values, and the per-dimension weights are raised to
``budget.priority`` to concentrate samples near the peak.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateDistributionError, FullyContractedError, ShapeError
from .grid import DomainGrid
from .tt import TensorTrain, chain_indices, chain_points, rows_times_slices, tt_eval_continuous

_CHUNK_FLOATS = 4_000_000
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SampleBudget:
    """How many candidates to draw and what to do with the best ones.

    ``priority`` is the exponent applied to the per-dimension weights;
    1 reproduces exact sampling from the squared function.  The ``polish``
    best candidates are improved by exact coordinate ascent over grid
    fibers before the winner is picked (0 disables this).
    """

    n_samples: int = 100
    top_k: int = 1
    refine: bool = False
    priority: float = 4.0
    refine_iters: int = 20
    polish: int = 3

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not 1 <= self.top_k <= self.n_samples:
            raise ValueError("top_k must satisfy 1 <= top_k <= n_samples")
        if self.priority <= 0:
            raise ValueError("priority must be positive")
        if self.polish < 0:
            raise ValueError("polish must be >= 0")


def _grids_tuple(grids, d):
    grids = tuple(grids)
    if len(grids) != d:
        raise ShapeError(f"{len(grids)} grids for {d} dimensions")
    return grids


def right_grams(cores: Sequence[np.ndarray]) -> list:
    """``grams[k]`` is the Gram matrix of the squared train over dims ``k:``."""
    grams = [None] * (len(cores) + 1)
    grams[-1] = np.ones((1, 1))
    for k in range(len(cores) - 1, -1, -1):
        c = cores[k]
        grams[k] = np.einsum("ais,st,bit->ab", c, grams[k + 1], c)
    return grams


def _shifted_cores(cores: Sequence[np.ndarray]) -> list:
    """Block-diagonal cores realizing ``f + c`` given a left vector ``[l, c]``."""
    out = []
    last = len(cores) - 1
    for k, c in enumerate(cores):
        r0, n, r1 = c.shape
        if k == last:
            z = np.empty((r0 + 1, n, 1))
            z[:r0] = c
            z[r0] = 1.0
        else:
            z = np.zeros((r0 + 1, n, r1 + 1))
            z[:r0, :, :r1] = c
            z[r0, :, r1] = 1.0
        out.append(z)
    return out


def _chunks(total: int, per_row: int):
    step = max(1, _CHUNK_FLOATS // max(per_row, 1))
    for start in range(0, total, step):
        yield slice(start, min(total, start + step))


def _gram_factors(grams) -> list:
    """``F`` with ``F F^T = G`` for each (symmetric PSD) Gram matrix."""
    out = []
    for g in grams:
        lam, q = np.linalg.eigh(0.5 * (g + g.T))
        keep = lam > max(lam.max(), 0.0) * 1e-15
        if not keep.any():
            keep = lam >= lam.max()
        out.append(q[:, keep] * np.sqrt(np.maximum(lam[keep], 0.0)))
    return out


def _pick(w: np.ndarray, u: np.ndarray, power: float, first: bool) -> np.ndarray:
    """Inverse-CDF choice along the last axis of nonnegative weights ``w``."""
    top = w.max(axis=-1, keepdims=True)
    if first and np.any(top <= 0):
        raise DegenerateDistributionError("all sampling weights vanish")
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(top > 0, w / top, 1.0)
    if power != 1.0:
        w = w**power
    cdf = np.cumsum(w, axis=-1)
    # zero-weight options are never selected
    pick = np.sum(cdf <= u[..., None] * cdf[..., -1:], axis=-1)
    return np.minimum(pick, w.shape[-1] - 1)


def _draw(left: np.ndarray, cores, grams, uniforms: np.ndarray, power: float, strict: bool = True) -> np.ndarray:
    """Sample indices ``(B, S, D)`` for each row of ``left`` using shared uniforms.

    With ``G = F F^T`` the weight of option ``i`` is ``|v core[:, i, :] F|^2``,
    so each dimension costs one matmul per chunk of rows.  Rows whose
    weights all vanish raise unless ``strict`` is false, in which case they
    are sampled uniformly.
    """
    b = left.shape[0]
    s, d = uniforms.shape
    out = np.empty((b, s, d), dtype=np.int64)
    factors = _gram_factors(grams[1:])
    folded = [np.einsum("rns,st->rnt", c, f) for c, f in zip(cores, factors)]
    width = max(f.shape[1] * f.shape[2] for f in folded)
    for sl in _chunks(b, s * width):
        lv = left[sl]
        nb = lv.shape[0]
        # the first dimension does not depend on the sample
        r0, n, _ = folded[0].shape
        z = (lv @ folded[0].reshape(r0, -1)).reshape(nb, n, -1)
        w = np.einsum("bnt,bnt->bn", z, z)
        pick = _pick(np.broadcast_to(w[:, None, :], (nb, s, n)), uniforms[None, :, 0], power, strict)
        out[sl, :, 0] = pick
        m0 = (lv @ cores[0].reshape(r0, -1)).reshape(nb, n, -1)
        v = np.take_along_axis(m0, pick[:, :, None], axis=1).reshape(nb * s, -1)
        for k in range(1, d):
            r0, n, _ = folded[k].shape
            z = (v @ folded[k].reshape(r0, -1)).reshape(nb * s, n, -1)
            w = np.einsum("bnt,bnt->bn", z, z)
            pick = _pick(w, np.tile(uniforms[:, k], nb), power, False)
            out[sl, :, k] = pick.reshape(nb, s)
            if k < d - 1:
                v = rows_times_slices(v, cores[k], pick)
    return out


def _values_at(left: np.ndarray, cores, idx: np.ndarray) -> np.ndarray:
    b, s, d = idx.shape
    flat = idx.reshape(b * s, d)
    lefts = np.repeat(left, s, axis=0)
    return chain_indices(cores, flat, lefts)[:, 0].reshape(b, s)


def sample_batch(left, cores, grids, n_samples: int, seed: int, priority: float = 1.0):
    """Batched squared-marginal sampling.

    Returns indices ``(B, S, D)`` and train values ``(B, S)``.
    """
    left = np.atleast_2d(np.asarray(left, dtype=float))
    uniforms = np.random.default_rng(seed).random((n_samples, len(cores)))
    idx = _draw(left, cores, right_grams(cores), uniforms, priority)
    return idx, _values_at(left, cores, idx)


def _enumerate(left, cores):
    shape = tuple(c.shape[1] for c in cores)
    grid_idx = np.stack(np.unravel_index(np.arange(int(np.prod(shape))), shape), axis=1)
    b = left.shape[0]
    idx = np.broadcast_to(grid_idx[None], (b, *grid_idx.shape))
    return np.ascontiguousarray(idx), _values_at(left, cores, idx)


def candidates_batch(left, cores, grids, budget: SampleBudget, seed: int):
    """Candidate indices and values for maximization, per batch row.

    When the whole grid is no larger than the sample budget it is
    enumerated; otherwise a pilot of ``n_samples // 4`` plain squared
    samples estimates the minimum, and the rest are drawn with priority
    from the shifted train.
    """
    left = np.atleast_2d(np.asarray(left, dtype=float))
    d = len(cores)
    if int(np.prod([c.shape[1] for c in cores])) <= budget.n_samples:
        return _enumerate(left, cores)
    rng = np.random.default_rng(seed)
    n_pilot = max(1, budget.n_samples // 4)
    n_main = budget.n_samples - n_pilot
    u_pilot = rng.random((n_pilot, d))
    u_main = rng.random((n_main, d))
    idx_p = _draw(left, cores, right_grams(cores), u_pilot, 1.0)
    val_p = _values_at(left, cores, idx_p)
    if n_main == 0:
        return idx_p, val_p
    shift = np.maximum(-val_p.min(axis=1), 0.0)
    ext = _shifted_cores(cores)
    left_ext = np.concatenate([left, shift[:, None]], axis=1)
    # a flat row shifts to zero; any point is then a maximizer
    idx_m = _draw(left_ext, ext, right_grams(ext), u_main, budget.priority, strict=False)
    val_m = _values_at(left, cores, idx_m)
    return np.concatenate([idx_p, idx_m], axis=1), np.concatenate([val_p, val_m], axis=1)


def _fiber_ascent(left, cores, idx, vals, max_rounds=20):
    """Coordinate ascent on the grid: move each coordinate to the best node of
    its fiber (others fixed) until no coordinate changes."""
    idx = idx.copy()
    vals = vals.copy()
    d = len(cores)
    rows = np.arange(idx.shape[0])
    for _ in range(max_rounds):
        moved = False
        for k in range(d):
            lv = chain_indices(cores[:k], idx[:, :k], left) if k else left
            rv = np.ones((idx.shape[0], 1))
            for j in range(d - 1, k, -1):
                rv = np.einsum("rbs,bs->br", cores[j][:, idx[:, j], :], rv)
            fib = np.einsum("br,rns,bs->bn", lv, cores[k], rv)
            best = np.argmax(fib, axis=1)
            gain = fib[rows, best] > vals
            if gain.any():
                moved = True
                idx[gain, k] = best[gain]
                vals = np.where(gain, fib[rows, best], vals)
        if not moved:
            break
    return idx, vals


def _refine(left, cores, grids, points, values, iters):
    """Coordinate-wise golden-section search within one cell of each coordinate."""
    pts = points.copy()
    vals = values.copy()
    for j, g in enumerate(grids):
        if g.n_points < 2:
            continue
        lo = np.maximum(pts[:, j] - g.step, g.lower)
        hi = np.minimum(pts[:, j] + g.step, g.upper)

        def f(x):
            trial = pts.copy()
            trial[:, j] = x
            return chain_points(cores, grids, trial, left)[:, 0]

        a, b = lo, hi
        c = b - _GOLDEN * (b - a)
        e = a + _GOLDEN * (b - a)
        fc, fe = f(c), f(e)
        for _ in range(iters):
            keep_left = fc >= fe
            b = np.where(keep_left, e, b)
            a = np.where(keep_left, a, c)
            new_c = b - _GOLDEN * (b - a)
            new_e = a + _GOLDEN * (b - a)
            c_next = np.where(keep_left, new_c, e)
            e_next = np.where(keep_left, c, new_e)
            f_new = f(np.where(keep_left, new_c, new_e))
            fc, fe = np.where(keep_left, f_new, fe), np.where(keep_left, fc, f_new)
            c, e = c_next, e_next
        x = np.where(fc >= fe, c, e)
        fx = np.maximum(fc, fe)
        better = fx > vals
        pts[better, j] = x[better]
        vals = np.where(better, fx, vals)
    return pts, vals


def argmax_batch(left, cores, grids, budget: SampleBudget, seed: int):
    """Best point per row of ``left``: returns ``(points (B, D), values (B,))``."""
    left = np.atleast_2d(np.asarray(left, dtype=float))
    grids = _grids_tuple(grids, len(cores))
    idx, vals = candidates_batch(left, cores, grids, budget, seed)
    rows = np.arange(idx.shape[0])
    if budget.polish:
        order = np.argsort(-vals, axis=1, kind="stable")[:, : budget.polish]
        starts = idx[rows[:, None], order]
        k = starts.shape[1]
        flat_idx, flat_vals = _fiber_ascent(
            np.repeat(left, k, axis=0), cores,
            starts.reshape(-1, len(cores)), vals[rows[:, None], order].reshape(-1),
        )
        idx = np.concatenate([idx, flat_idx.reshape(-1, k, len(cores))], axis=1)
        vals = np.concatenate([vals, flat_vals.reshape(-1, k)], axis=1)
    best = np.argmax(vals, axis=1)
    best_idx = idx[rows, best]
    points = np.stack([g.point(best_idx[:, k]) for k, g in enumerate(grids)], axis=1)
    values = vals[rows, best]
    if budget.refine:
        points, values = _refine(left, cores, grids, points, values, budget.refine_iters)
    return points, values


def condition_left(tt: TensorTrain, grids, prefix) -> np.ndarray:
    """Row vector left of the first free dimension after pinning ``prefix``."""
    prefix = np.atleast_2d(np.asarray(prefix, dtype=float))
    k = prefix.shape[1]
    if k > tt.ndim:
        raise ShapeError(f"prefix of length {k} for a {tt.ndim}-D train")
    grids = _grids_tuple(grids, tt.ndim)
    return chain_points(tt.cores[:k], grids[:k], prefix)


def condition(tt: TensorTrain, grids, prefix):
    """Pin the leading coordinates to real values (interpolating slices).

    Returns the train over the remaining dimensions, or a float when every
    dimension is pinned.
    """
    prefix = np.asarray(prefix, dtype=float).reshape(-1)
    k = prefix.shape[0]
    v = condition_left(tt, grids, prefix[None, :])[0]
    if k == tt.ndim:
        return float(v[0])
    if k == 0:
        return tt
    rest = list(tt.cores[k:])
    rest[0] = np.einsum("r,ris->is", v, rest[0])[None]
    return TensorTrain(rest)


def prioritized_sample(tt: TensorTrain, grids, budget: SampleBudget, rng_seed: int):
    """Draw ``budget.n_samples`` points; returns a list of ``(point, value)``."""
    grids = _grids_tuple(grids, tt.ndim)
    idx, vals = sample_batch(np.ones((1, 1)), tt.cores, grids, budget.n_samples, rng_seed, budget.priority)
    out = []
    for s in range(idx.shape[1]):
        pt = np.array([g.point(idx[0, s, k]) for k, g in enumerate(grids)])
        out.append((pt, float(vals[0, s])))
    return out


def argmax_retrieve(tt: TensorTrain, grids, budget: SampleBudget, rng_seed: int):
    """Best candidate ``(point, value)``; ties go to the earliest sample.

    With ``budget.top_k > 1`` a list of the ``top_k`` best distinct
    candidates (best first) is returned instead.
    """
    grids = _grids_tuple(grids, tt.ndim)
    left = np.ones((1, 1))
    if budget.top_k == 1:
        pts, vals = argmax_batch(left, tt.cores, grids, budget, rng_seed)
        return pts[0], float(vals[0])
    idx, vals = candidates_batch(left, tt.cores, grids, budget, rng_seed)
    _, first = np.unique(idx[0], axis=0, return_index=True)
    order = first[np.argsort(-vals[0, first], kind="stable")][: budget.top_k]
    return [
        (np.array([g.point(idx[0, s, k]) for k, g in enumerate(grids)]), float(vals[0, s]))
        for s in order
    ]
