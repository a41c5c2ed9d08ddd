import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ttdc.errors import DegenerateDistributionError
from ttdc.grid import Grid
from ttdc.tt import TensorTrain, tt_eval_continuous, tt_slice
from ttdc.ttgo import SampleBudget, argmax_retrieve, condition, prioritized_sample, sample_batch

from conftest import random_tt, smooth_tt


def unit(n, d):
    return [Grid(f"x{k}", 0.0, 1.0, n) for k in range(d)]


def test_budget_validation():
    with pytest.raises(ValueError):
        SampleBudget(n_samples=0)
    with pytest.raises(ValueError):
        SampleBudget(n_samples=5, top_k=6)
    with pytest.raises(ValueError):
        SampleBudget(priority=0.0)


def test_condition_on_nodes_is_slice():
    tt = random_tt((4, 5, 3), 2, seed=1)
    grids = unit(4, 1) + [Grid("b", 0.0, 1.0, 5), Grid("c", 0.0, 1.0, 3)]
    got = condition(tt, grids, [grids[0].point(2)])
    np.testing.assert_allclose(got.full(), tt_slice(tt, 0, 2).full(), atol=1e-12)


def test_condition_off_node_matches_continuous_evaluation():
    tt = random_tt((6, 5, 7), 3, seed=2)
    grids = [Grid("a", -1.0, 1.0, 6), Grid("b", 0.0, 2.0, 5), Grid("c", 0.0, 1.0, 7)]
    rng = np.random.default_rng(0)
    prefix = [0.137]
    rest_tt = condition(tt, grids, prefix)
    rests = np.column_stack([rng.uniform(0, 2, 100), rng.uniform(0, 1, 100)])
    direct = tt_eval_continuous(tt, grids, np.column_stack([np.full(100, 0.137), rests]))
    np.testing.assert_allclose(tt_eval_continuous(rest_tt, grids[1:], rests), direct, atol=1e-12)
    full = condition(tt, grids, [0.137, 1.3, 0.4])
    assert abs(full - tt_eval_continuous(tt, grids, [0.137, 1.3, 0.4])) < 1e-12


def test_rank_one_sampling_follows_core_fibers():
    rng = np.random.default_rng(3)
    a, b = rng.random(10), rng.random(10)
    tt = TensorTrain([a.reshape(1, 10, 1), b.reshape(1, 10, 1)])
    idx, _ = sample_batch(np.ones((1, 1)), tt.cores, unit(10, 2), 40_000, seed=1)
    for k, fiber in enumerate((a, b)):
        freq = np.bincount(idx[0, :, k], minlength=10) / idx.shape[1]
        np.testing.assert_allclose(freq, fiber**2 / np.sum(fiber**2), atol=0.01)


def test_indicator_always_sampled():
    cores = [np.zeros((1, 6, 1)), np.zeros((1, 7, 1))]
    cores[0][0, 4, 0] = 1.0
    cores[1][0, 2, 0] = 1.0
    out = prioritized_sample(TensorTrain(cores), unit(6, 1) + unit(7, 1), SampleBudget(n_samples=30), 0)
    assert all(np.allclose(p, [0.8, 2 / 6]) and v == 1.0 for p, v in out)


def test_histogram_matches_squared_distribution():
    g = unit(12, 2)
    x = g[0].points
    full = np.exp(-((x[:, None] - 0.3) ** 2 + (x[None, :] - 0.6) ** 2) / 0.1) + 0.3 * np.outer(x, x)
    from ttdc.tt import tt_from_full

    tt = tt_from_full(full)
    n = 100_000
    idx, _ = sample_batch(np.ones((1, 1)), tt.cores, g, n, seed=5)
    counts = np.zeros((12, 12))
    np.add.at(counts, (idx[0, :, 0], idx[0, :, 1]), 1)
    p = full**2 / np.sum(full**2)
    expected = n * p
    mask = expected > 5
    chi2 = np.sum((counts[mask] - expected[mask]) ** 2 / expected[mask])
    dof = mask.sum() - 1
    # generous bound: mean dof, std sqrt(2 dof)
    assert chi2 < dof + 5 * np.sqrt(2 * dof)


def test_zero_train_is_degenerate():
    tt = TensorTrain([np.zeros((1, 4, 1)), np.zeros((1, 3, 1))])
    with pytest.raises(DegenerateDistributionError):
        prioritized_sample(tt, unit(4, 1) + unit(3, 1), SampleBudget(n_samples=20), 0)


def test_rank_one_argmax_is_per_core_argmax():
    rng = np.random.default_rng(4)
    fibers = [rng.random(9) + 0.1 for _ in range(3)]
    tt = TensorTrain([f.reshape(1, -1, 1) for f in fibers])
    pt, val = argmax_retrieve(tt, unit(9, 3), SampleBudget(n_samples=50), 1)
    best = [np.argmax(f) for f in fibers]
    np.testing.assert_allclose(pt, [b / 8 for b in best])
    assert abs(val - np.prod([f.max() for f in fibers])) < 1e-12


def test_constant_function():
    tt = TensorTrain.constant((10, 10, 10), -2.0)
    pt, val = argmax_retrieve(tt, unit(10, 3), SampleBudget(n_samples=20), 0)
    assert val == pytest.approx(-2.0) and pt.shape == (3,)


def test_single_peak_hit_rate():
    g = unit(25, 2)
    x = g[0].points
    hits = 0
    rng = np.random.default_rng(11)
    from ttdc.tt import tt_from_full

    for trial in range(100):
        c = rng.uniform(0.1, 0.9, 2)
        full = np.exp(-((x[:, None] - c[0]) ** 2 + (x[None, :] - c[1]) ** 2) / 0.05)
        tt = tt_from_full(full, 1e-10)
        pt, _ = argmax_retrieve(tt, g, SampleBudget(n_samples=100), trial)
        hits += np.allclose(pt, [x[i] for i in np.unravel_index(np.argmax(full), full.shape)])
    assert hits >= 95


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_value_dominates_candidates_and_scale_invariance(seed):
    tt = random_tt((8, 9, 7), 3, seed=seed)
    g = [Grid("a", 0, 1, 8), Grid("b", 0, 1, 9), Grid("c", 0, 1, 7)]
    budget = SampleBudget(n_samples=40, polish=0)
    pt, val = argmax_retrieve(tt, g, budget, seed)
    for _, v in prioritized_sample(tt, g, SampleBudget(n_samples=10, priority=1.0), seed):
        pass
    cands = argmax_retrieve(tt, g, SampleBudget(n_samples=40, top_k=40, polish=0), seed)
    assert val >= max(v for _, v in cands) - 1e-12
    pt2, val2 = argmax_retrieve(tt.scaled(3.5), g, budget, seed)
    np.testing.assert_allclose(pt2, pt)
    assert val2 == pytest.approx(3.5 * val)


def test_top_k_returns_sorted_distinct():
    tt = random_tt((8, 8), 2, seed=0)
    out = argmax_retrieve(tt, unit(8, 2), SampleBudget(n_samples=40, top_k=5), 0)
    vals = [v for _, v in out]
    assert vals == sorted(vals, reverse=True)
    assert len({tuple(p) for p, _ in out}) == len(out)


def test_refine_stays_within_a_cell_and_improves():
    g = unit(11, 2)
    x = g[0].points
    full = -((x[:, None] - 0.33) ** 2) - (x[None, :] - 0.71) ** 2
    from ttdc.tt import tt_from_full

    tt = tt_from_full(full)
    p0, v0 = argmax_retrieve(tt, g, SampleBudget(n_samples=121), 0)
    p1, v1 = argmax_retrieve(tt, g, SampleBudget(n_samples=121, refine=True), 0)
    assert v1 >= v0 - 1e-15
    assert np.all(np.abs(p1 - p0) <= g[0].step + 1e-12)
    assert abs(v1 - tt_eval_continuous(tt, g, p1)) < 1e-12


def test_exhaustive_conditional_argmax_rate():
    hits = 0
    for trial in range(40):
        tt = smooth_tt(100 + trial, n=20, d=4)
        g = unit(20, 4)
        rest = condition(tt, g, [g[0].point(trial % 5)])
        full = rest.full()
        pt, _ = argmax_retrieve(rest, g[1:], SampleBudget(n_samples=100), trial)
        best = np.unravel_index(np.argmax(full), full.shape)
        hits += np.allclose(pt, [g[1].point(i) for i in best])
    assert hits >= 38
