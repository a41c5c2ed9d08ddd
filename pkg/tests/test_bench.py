import numpy as np
import pytest

from ttdc.bench import RetrievalTiming, bench_retrieval
from ttdc.grid import DomainGrid, Grid
from ttdc.tt import TensorTrain
from ttdc.ttpi import PolicyModel


def model_with(n_param, rest=(6, 6, 6), rank=4):
    sizes = (n_param, n_param) + rest
    grids = DomainGrid([Grid(f"g{k}", 0.0, 1.0, s) if s > 1 else Grid.singleton(f"g{k}", 0.0)
                        for k, s in enumerate(sizes)], 2, 2, 1)
    return PolicyModel(grids, TensorTrain.random(sizes, rank, np.random.default_rng(n_param)))


def test_ratio_grows_with_parameter_grid():
    ratios = [bench_retrieval(model_with(n), repeats=5).ratio for n in (10, 25, 50)]
    assert ratios[0] < ratios[1] < ratios[2]
    assert ratios[2] >= 10


def test_single_point_parameter_grid_gives_no_speedup():
    res = bench_retrieval(model_with(1), repeats=20)
    assert res.baseline == "dense" and res.n_param_points == 1
    assert res.ratio < 10


def test_sampled_fallback_when_dense_is_too_large():
    res = bench_retrieval(model_with(5), repeats=2, capacity=100, n_eval=50)
    assert res.baseline == "sampled-baseline"
    assert res.function_mean > 0 and res.core_mean > 0


def test_row_and_validation():
    row = RetrievalTiming(1.0, 0.1, 4.0, 0.2, 3, "dense", 9).as_row()
    assert row["ratio"] == 4.0 and row["baseline"] == "dense"
    assert RetrievalTiming(0.0, 0.0, 1.0, 0.0, 1, "dense", 1).ratio == float("inf")
    with pytest.raises(ValueError):
        bench_retrieval(model_with(3), repeats=0)
