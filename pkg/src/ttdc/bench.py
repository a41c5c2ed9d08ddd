"""Timing of core-level against function-level policy retrieval."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .contraction import DENSE_CAPACITY, ParamDistribution, contract, function_level_contract, function_level_contract_sampled
from .ttpi import PolicyModel


@dataclass
class RetrievalTiming:
    """Mean and standard deviation of both retrieval paths, in seconds.

    ``baseline`` is ``"dense"`` when the function-level path densified the
    full ``(x, u)`` tensor and ``"sampled-baseline"`` when it only evaluated
    every parameter slice at ``n_eval`` random indices because the dense
    tensor exceeded the capacity.  The sampled path does strictly less work,
    so the reported ratio is then a lower bound.
    """

    core_mean: float
    core_std: float
    function_mean: float
    function_std: float
    repeats: int
    baseline: str
    n_param_points: int

    @property
    def ratio(self) -> float:
        return self.function_mean / self.core_mean if self.core_mean > 0 else float("inf")

    def as_row(self) -> dict:
        return {"core_mean": self.core_mean, "core_std": self.core_std, "function_mean": self.function_mean,
                "function_std": self.function_std, "ratio": self.ratio, "repeats": self.repeats,
                "baseline": self.baseline, "n_param_points": self.n_param_points}


def _time(fn, repeats: int) -> np.ndarray:
    out = np.empty(repeats)
    for k in range(repeats):
        t0 = time.perf_counter()
        fn()
        out[k] = time.perf_counter() - t0
    return out


def bench_retrieval(model: PolicyModel, dist: ParamDistribution | None = None, repeats: int = 20,
                    capacity: int = DENSE_CAPACITY, n_eval: int = 1000, seed: int = 0) -> RetrievalTiming:
    """Time ``repeats`` runs of :func:`contract` and of the function-level reference.

    ``dist`` defaults to the uniform distribution over the parameter grid.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    g = model.grids
    sizes = g.sizes[: g.n_param]
    dist = ParamDistribution.uniform(sizes) if dist is None else dist
    rest = int(np.prod(g.sizes[g.n_param :], dtype=float))
    if rest <= capacity:
        baseline = "dense"

        def slow():
            function_level_contract(model, dist, capacity)
    else:
        baseline = "sampled-baseline"

        def slow():
            function_level_contract_sampled(model, dist, n_eval, seed)

    fast = _time(lambda: contract(model, dist), repeats)
    ref = _time(slow, repeats)
    return RetrievalTiming(float(fast.mean()), float(fast.std()), float(ref.mean()), float(ref.std()),
                           repeats, baseline, int(np.prod(sizes)))
