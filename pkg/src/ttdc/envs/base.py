"""Common interface of the manipulation environments.

All methods are vectorized over a leading batch axis: ``states`` is
``(B, m)``, ``actions`` is ``(B, n)`` and ``params`` is ``(B, d)``.  One
decision step may cover several integrator substeps; its reward is the sum
of the per-substep rewards with the action held constant.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from ..grid import DomainGrid


class Environment(ABC):
    """Deterministic black-box dynamics conditioned on domain parameters."""

    name: str = "env"
    #: expected (parameter, state, action) dimensions; None accepts any
    block_sizes: tuple | None = None

    def __init__(self, grids: DomainGrid, gamma: float, dt: float, substeps: int = 1, horizon: int = 1):
        if not 0.0 <= gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if grids.n_param < 1 or grids.n_state < 1 or grids.n_action < 1:
            raise ValueError("environments need parameter, state and action blocks")
        have = (grids.n_param, grids.n_state, grids.n_action)
        if self.block_sizes is not None and have != tuple(self.block_sizes):
            raise ValueError(f"{self.name} needs (param, state, action) dimensions {self.block_sizes}, got {have}")
        if substeps < 1 or horizon < 1:
            raise ValueError("substeps and horizon must be >= 1")
        self.grids = grids
        self.gamma = float(gamma)
        self.dt = float(dt)
        self.substeps = int(substeps)
        self.horizon = int(horizon)
        self._lo = np.array([g.lower for g in grids.state_grids])
        self._hi = np.array([g.upper for g in grids.state_grids])

    @property
    def n_param(self) -> int:
        return self.grids.n_param

    @property
    def n_state(self) -> int:
        return self.grids.n_state

    @property
    def n_action(self) -> int:
        return self.grids.n_action

    @abstractmethod
    def simulate(self, states, actions, params) -> tuple[np.ndarray, np.ndarray]:
        """One decision step without clamping: ``(next_states, rewards)``."""

    @abstractmethod
    def initial_states(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Episode start states, shape ``(n, m)``."""

    @abstractmethod
    def state_error(self, states) -> np.ndarray:
        """L2 distance of each state to the task target."""

    def clamp_states(self, states) -> np.ndarray:
        return np.clip(states, self._lo, self._hi)

    def step(self, states, actions, params) -> np.ndarray:
        """Next states clamped into the state grid box."""
        return self.clamp_states(self.simulate(states, actions, params)[0])

    def reward(self, states, actions, params) -> np.ndarray:
        return self.simulate(states, actions, params)[1]

    def transition(self, states, actions, params) -> tuple[np.ndarray, np.ndarray]:
        nxt, r = self.simulate(states, actions, params)
        return self.clamp_states(nxt), r

    def describe(self) -> dict:
        return {"name": self.name, "gamma": self.gamma, "dt": self.dt,
                "substeps": self.substeps, "horizon": self.horizon}


def as_batch(x, width: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, width)
