import numpy as np
import pytest

from ttdc.grid import DomainGrid, Grid
from ttdc.tt import TensorTrain


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_tt(shape, rank, seed=0):
    return TensorTrain.random(shape, rank, np.random.default_rng(seed))


def unit_grids(sizes, n_param=0, n_state=None, n_action=0):
    n_state = len(sizes) - n_param - n_action if n_state is None else n_state
    return DomainGrid([Grid(f"x{k}", 0.0, 1.0, n) for k, n in enumerate(sizes)], n_param, n_state, n_action)


def smooth_tt(seed, n=30, rank=3, d=3, freqs=3):
    """Random low-rank function: every core fiber is a random cosine series of low frequency."""
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 1.0, n)
    ranks = [1] + [rank] * (d - 1) + [1]
    cores = []
    for k in range(d):
        c = np.zeros((ranks[k], n, ranks[k + 1]))
        for m in range(freqs + 1):
            amp = rng.standard_normal((ranks[k], ranks[k + 1])) / (1 + m)
            phase = rng.uniform(0, 2 * np.pi)
            c += amp[:, None, :] * np.cos(np.pi * m * x + phase)[None, :, None]
        cores.append(c)
    return TensorTrain(cores)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
