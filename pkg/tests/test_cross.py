import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ttdc.cross import CrossConfig, NotConvergedWarning, cross_approximate, maxvol, on_grid
from ttdc.errors import CrossEvaluationError
from ttdc.grid import DomainGrid, Grid
from ttdc.tt import tt_eval_index

from conftest import random_tt


def grids_of(n, d, lo=0.0, hi=1.0):
    return DomainGrid([Grid(f"x{k}", lo, hi, n) for k in range(d)], 0, d)


def rel_rms(tt, f, grids, n=1000, seed=99):
    idx = np.random.default_rng(seed).integers(0, grids.sizes, size=(n, len(grids)))
    exact = f(idx)
    return np.linalg.norm(tt_eval_index(tt, idx) - exact) / np.linalg.norm(exact)


def test_maxvol_dominance():
    a = np.random.default_rng(0).standard_normal((40, 5))
    idx = maxvol(a)
    assert len(set(idx.tolist())) == 5
    coeff = a @ np.linalg.inv(a[idx])
    assert np.max(np.abs(coeff)) <= 1.01 + 1e-9
    np.testing.assert_allclose(coeff[idx], np.eye(5), atol=1e-10)


def test_constant_function_is_rank_one():
    g = grids_of(7, 4)
    res = cross_approximate(lambda idx: np.full(len(idx), 3.7), g)
    assert res.converged and max(res.tt.ranks) == 1
    np.testing.assert_allclose(res.tt.full(), 3.7, atol=1e-10)


def test_separable_function():
    g = grids_of(12, 3)
    fn = on_grid(lambda x: np.exp(x[:, 0]) * (1 + x[:, 1] ** 2) * np.cos(x[:, 2]), g)
    res = cross_approximate(fn, g, CrossConfig(eps=1e-6))
    assert max(res.tt.ranks) <= 2
    assert rel_rms(res.tt, fn, g) <= 1e-6


def test_sin_sum_has_rank_two():
    g = grids_of(50, 2, 0.0, 3.0)
    fn = on_grid(lambda x: np.sin(x[:, 0] + x[:, 1]), g)
    res = cross_approximate(fn, g, CrossConfig(eps=1e-3))
    assert max(res.tt.ranks) <= 2
    assert rel_rms(res.tt, fn, g) <= 1e-3


def test_recovers_low_rank_train_with_few_evaluations():
    target = random_tt((10,) * 6, 3, seed=5)
    f = lambda idx: tt_eval_index(target, idx)
    res = cross_approximate(f, target.shape, CrossConfig(eps=1e-8, r_max=10))
    assert res.converged
    assert rel_rms(res.tt, f, grids_of(10, 6)) <= 1e-8
    assert res.n_evals < 0.01 * 10**6


def test_deterministic_given_seed():
    g = grids_of(15, 4)
    fn = on_grid(lambda x: 1.0 / (1.0 + np.sum(x, axis=1)), g)
    a = cross_approximate(fn, g, CrossConfig(eps=1e-5, seed=3))
    b = cross_approximate(fn, g, CrossConfig(eps=1e-5, seed=3))
    for x, y in zip(a.tt.cores, b.tt.cores):
        assert np.array_equal(x, y)


def test_interpolates_at_pivots():
    g = grids_of(15, 4)
    fn = on_grid(lambda x: 1.0 / (1.0 + np.sum(x**2, axis=1)), g)
    res = cross_approximate(fn, g, CrossConfig(eps=1e-3))
    np.testing.assert_allclose(tt_eval_index(res.tt, res.pivots), fn(res.pivots), rtol=1e-8, atol=1e-12)


def test_not_converged_warns_and_reports_best():
    g = grids_of(20, 3)
    fn = on_grid(lambda x: np.abs(x[:, 0] - x[:, 1] + 0.3 * x[:, 2] - 0.31) ** 0.5, g)
    with pytest.warns(NotConvergedWarning):
        res = cross_approximate(fn, g, CrossConfig(eps=1e-12, r_max=2, max_sweeps=2))
    assert not res.converged
    assert res.error == min(h["val_err"] for h in res.history)
    assert max(res.tt.ranks) <= 2


def test_non_finite_value_carries_index():
    def f(idx):
        out = np.ones(len(idx))
        out[(idx[:, 0] == 2) & (idx[:, 1] == 1)] = np.nan
        return out

    with pytest.raises(CrossEvaluationError) as info:
        cross_approximate(f, (3, 3), CrossConfig(validation_samples=50))
    assert info.value.index[:2] == (2, 1)


def test_warm_start_reuses_index_sets():
    g = grids_of(20, 5)
    fn = on_grid(lambda x: np.exp(-np.sum((x - 0.4) ** 2, axis=1)), g)
    cold = cross_approximate(fn, g, CrossConfig(eps=1e-6))
    fn2 = on_grid(lambda x: 1.01 * np.exp(-np.sum((x - 0.4) ** 2, axis=1)), g)
    warm = cross_approximate(fn2, g, CrossConfig(eps=1e-6), init=cold)
    assert warm.converged and warm.n_evals <= cold.n_evals


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 1000), rank=st.integers(1, 4))
def test_random_low_rank_recovery(seed, rank):
    target = random_tt((6, 7, 5, 6), rank, seed=seed)
    res = cross_approximate(lambda idx: tt_eval_index(target, idx), target.shape,
                            CrossConfig(eps=1e-8, r_max=10, max_sweeps=10, seed=seed))
    full = target.full()
    assert np.linalg.norm(res.tt.full() - full) <= 1e-6 * np.linalg.norm(full)
