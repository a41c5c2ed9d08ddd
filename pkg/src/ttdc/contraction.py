"""Domain contraction: parameter-conditioned advantages from a product distribution.

Given a product-form distribution ``p_j = p_1(j_1) ... p_d(j_d)`` over the
parameter grid, the conditioned advantage ``sum_j p_j A(alpha_j, x, u)`` is
obtained by collapsing each parameter core to ``sum_j p_i[j] core[:, j, :]``
and absorbing the resulting row vector into the first state core.  A
one-hot distribution gives the parameter-specific advantage (domain
adaptation) and a uniform one the average over the whole grid (domain
randomization).
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, ShapeError
from .grid import DomainGrid
from .tt import TensorTrain, chain_indices, chain_points, tt_contract_weighted, tt_from_full, tt_round, tt_slice, weighted_left_vector
from .ttgo import SampleBudget, argmax_batch
from .ttpi import PolicyModel

DENSE_CAPACITY = 10**7


class InvalidWindowError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ParamDistribution:
    """Per-dimension probability vectors over parameter grid indices."""

    weights: tuple

    def __post_init__(self):
        ws = []
        for i, w in enumerate(self.weights):
            w = np.array(w, dtype=float).reshape(-1)
            if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError(f"weights of dimension {i} must be finite and nonnegative")
            if abs(w.sum() - 1.0) > 1e-9:
                raise ValueError(f"weights of dimension {i} sum to {w.sum()!r}, not 1")
            w.setflags(write=False)
            ws.append(w)
        object.__setattr__(self, "weights", tuple(ws))

    @property
    def ndim(self) -> int:
        return len(self.weights)

    @property
    def sizes(self) -> tuple:
        return tuple(w.size for w in self.weights)

    @classmethod
    def one_hot(cls, sizes: Sequence[int], index: Sequence[int]) -> "ParamDistribution":
        ws = []
        for n, j in zip(sizes, index):
            w = np.zeros(n)
            w[j] = 1.0
            ws.append(w)
        return cls(tuple(ws))

    @classmethod
    def uniform(cls, sizes: Sequence[int]) -> "ParamDistribution":
        return cls(tuple(np.full(n, 1.0 / n) for n in sizes))

    @classmethod
    def from_tensor_train(cls, tt: TensorTrain) -> "ParamDistribution":
        """Accept a rank-1 nonnegative train as a product distribution."""
        if any(r != 1 for r in tt.ranks):
            raise ShapeError("only rank-1 joint distributions are supported")
        ws = [c[0, :, 0] for c in tt.cores]
        if any(np.any(w < 0) or w.sum() <= 0 for w in ws):
            raise ValueError("distribution cores must be nonnegative with positive mass")
        return cls(tuple(w / w.sum() for w in ws))

    def to_tensor_train(self) -> TensorTrain:
        return TensorTrain([w.reshape(1, -1, 1) for w in self.weights])

    def mix(self, other: "ParamDistribution", lam: float) -> "ParamDistribution":
        """Per-dimension convex combination (product form is kept per dimension)."""
        return ParamDistribution(tuple(lam * a + (1 - lam) * b for a, b in zip(self.weights, other.weights)))

    def digest(self) -> str:
        h = hashlib.sha256()
        for w in self.weights:
            h.update(np.ascontiguousarray(w, dtype="<f8").tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class WindowSpec:
    center: tuple
    w: int

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.ravel(self.center)))
        if int(self.w) != self.w or self.w < 1:
            raise InvalidWindowError(f"window width must be a positive integer, got {self.w!r}")
        object.__setattr__(self, "w", int(self.w))


def window_start(n: int, center_index: int, w: int) -> int:
    """First index of a width-``w`` window around ``center_index``, kept inside ``[0, n)``."""
    return int(np.clip(center_index - (w - 1) // 2, 0, n - w))


def uniform_window(grids: DomainGrid, spec: WindowSpec) -> ParamDistribution:
    """Uniform mass ``1/w`` on ``w`` indices around the nearest node of ``spec.center``.

    Windows that would cross a boundary are shifted inward.  Even widths
    extend one index further to the right of the center.
    """
    pg = grids.param_grids
    if len(spec.center) != len(pg):
        raise ShapeError(f"center has {len(spec.center)} values for {len(pg)} parameter dimensions")
    ws = []
    for g, c in zip(pg, spec.center):
        if spec.w > g.n_points:
            raise InvalidWindowError(f"window width {spec.w} exceeds {g.n_points} points of {g.label!r}")
        g.locate(c)
        start = window_start(g.n_points, int(g.nearest_index(c)), spec.w)
        w = np.zeros(g.n_points)
        w[start : start + spec.w] = 1.0 / spec.w
        ws.append(w)
    return ParamDistribution(tuple(ws))


def _check(model: PolicyModel, dist: ParamDistribution):
    sizes = model.grids.sizes[: model.grids.n_param]
    if dist.sizes != sizes:
        raise ShapeError(f"distribution sizes {dist.sizes} do not match parameter grids {sizes}")


def parameter_specific_advantage(model: PolicyModel, j: Sequence[int]) -> TensorTrain:
    """Slice every parameter dimension of the advantage at index ``j``."""
    d = model.grids.n_param
    j = tuple(int(v) for v in j)
    if len(j) != d:
        raise ShapeError(f"expected {d} parameter indices, got {len(j)}")
    tt = model.advantage
    for v in j:
        tt = tt_slice(tt, 0, v)
    return tt


def contract(model: PolicyModel, dist: ParamDistribution, round_eps: float = 1e-10) -> TensorTrain:
    """``sum_j p_j A(alpha_j, x, u)`` at the core level, then rounded."""
    _check(model, dist)
    tt = tt_contract_weighted(model.advantage, dist.weights)
    return tt_round(tt, round_eps) if round_eps > 0 else tt


def _param_indices(sizes):
    return itertools.product(*(range(n) for n in sizes))


def function_level_contract(model: PolicyModel, dist: ParamDistribution, capacity: int = DENSE_CAPACITY) -> TensorTrain:
    """Reference contraction: accumulate every sliced advantage densely.

    Every parameter multi-index is visited in lexicographic order (zero
    weights included), the slice is expanded to a dense ``(x, u)`` tensor
    and accumulated, and the sum is compressed by TT-SVD.

    Raises
    ------
    CapacityError
        If the dense ``(x, u)`` tensor would exceed ``capacity`` entries.
    """
    _check(model, dist)
    rest = model.grids.sizes[model.grids.n_param :]
    size = int(np.prod(rest))
    if size > capacity:
        raise CapacityError(f"dense (x, u) tensor of {size} entries exceeds capacity {capacity}")
    acc = np.zeros(rest)
    for j in _param_indices(dist.sizes):
        p = np.prod([w[i] for w, i in zip(dist.weights, j)])
        acc += p * parameter_specific_advantage(model, j).full()
    return tt_from_full(acc, eps=1e-14)


def function_level_contract_sampled(model: PolicyModel, dist: ParamDistribution, n_eval: int = 10_000, seed: int = 0):
    """Function-level sum evaluated only at ``n_eval`` random ``(x, u)`` indices.

    Stands in for :func:`function_level_contract` when the dense tensor does
    not fit; returns ``(indices, values)``.
    """
    _check(model, dist)
    rest = model.grids.sizes[model.grids.n_param :]
    idx = np.random.default_rng(seed).integers(0, rest, size=(n_eval, len(rest)))
    acc = np.zeros(n_eval)
    for j in _param_indices(dist.sizes):
        p = np.prod([w[i] for w, i in zip(dist.weights, j)])
        acc += p * chain_indices(parameter_specific_advantage(model, j).cores, idx)[:, 0]
    return idx, acc


class ContractedPolicy:
    """State-to-action map ``argmax_u A(x, u | p)`` of a contracted advantage."""

    def __init__(self, tt: TensorTrain, grids: DomainGrid, budget: SampleBudget = SampleBudget(), seed: int = 0):
        if tt.shape != grids.sizes:
            raise ShapeError("contracted train does not match its grids")
        self.tt = tt
        self.grids = grids
        self.budget = budget
        self.seed = seed

    def actions(self, states):
        """Batched actions and advantage values for ``(B, m)`` states."""
        m = self.grids.n_state
        states = np.atleast_2d(np.asarray(states, dtype=float))
        left = chain_points(self.tt.cores[:m], self.grids.grids[:m], states)
        return argmax_batch(left, self.tt.cores[m:], self.grids.action_grids, self.budget, self.seed)

    def __call__(self, state) -> np.ndarray:
        return self.actions(state)[0][0]


def retrieve_policy(model: PolicyModel, dist: ParamDistribution, budget: SampleBudget = SampleBudget(),
                    seed: int = 0) -> ContractedPolicy:
    """Contract the parameter block and wrap the result as a policy."""
    tt = contract(model, dist)
    return ContractedPolicy(tt, model.grids.tail(model.grids.n_param), budget, seed)


def contracted_left_vectors(model: PolicyModel, dists: Sequence[ParamDistribution]) -> np.ndarray:
    """Row vectors of the contracted parameter block, one per distribution."""
    d = model.grids.n_param
    return np.stack([weighted_left_vector(model.advantage.cores[:d], dist.weights) for dist in dists])


def batch_actions(model: PolicyModel, lefts: np.ndarray, states, budget: SampleBudget = SampleBudget(), seed: int = 0):
    """Actions for many contracted policies at once (one per row of ``lefts``).

    Equivalent to calling each :class:`ContractedPolicy` on its own state,
    without forming the contracted trains.
    """
    g = model.grids
    d, m = g.n_param, g.n_state
    cores = model.advantage.cores
    left = chain_points(cores[d : d + m], g.grids[d : d + m], np.atleast_2d(states), lefts)
    return argmax_batch(left, cores[d + m :], g.action_grids, budget, seed)
