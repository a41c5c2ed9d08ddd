"""Planar hitting: an impulse sends an object sliding under Coulomb friction.

With initial speed ``v0 = |I| / m`` the object decelerates at ``mu * g``
and stops after ``t* = |I| / (m mu g)``, having travelled
``|I|^2 / (2 m^2 mu g)`` along the impulse direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from ..grid import DomainGrid, Grid
from .base import Environment, as_batch

G = 9.81
IMPACT_COST = 0.01


@dataclass(frozen=True)
class HitInstance:
    m: float
    mu: float
    x0: tuple = (0.0, 0.0)
    x_des: tuple = (0.0, 0.0)
    g: float = G

    def __post_init__(self):
        if not self.m > 0 or not self.mu > 0:
            raise ValueError("mass and friction coefficient must be positive")
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        object.__setattr__(self, "x_des", tuple(float(v) for v in self.x_des))


def slide(x0, impact, m, mu, g: float = G) -> np.ndarray:
    """Vectorized resting positions; all arguments broadcast over rows."""
    x0 = np.asarray(x0, dtype=float)
    impact = np.asarray(impact, dtype=float)
    m = np.asarray(m, dtype=float)[..., None]
    mu = np.asarray(mu, dtype=float)[..., None]
    # v0 t* - mu g t*^2 / 2 along I reduces to I |I| / (2 m^2 mu g)
    norm = np.linalg.norm(impact, axis=-1, keepdims=True)
    return x0 + impact * norm / (2.0 * m**2 * mu * g)


def hit_final_state(inst: HitInstance, impact) -> np.ndarray:
    """Resting position after the impact; zero impact leaves the object at ``x0``."""
    return slide(inst.x0, impact, inst.m, inst.mu, inst.g)


def hit_advantage(inst: HitInstance, impact):
    """``-(|x - x_des|^2 + 0.01 |I|^2)`` at the resting position ``x``."""
    impact = np.asarray(impact, dtype=float)
    x = hit_final_state(inst, impact)
    err = x - np.asarray(inst.x_des)
    val = -(np.sum(err**2, axis=-1) + IMPACT_COST * np.sum(impact**2, axis=-1))
    return float(val) if np.ndim(val) == 0 else val


def hit_optimal_impact(inst: HitInstance, n_coarse: int = 201) -> np.ndarray:
    """Maximize :func:`hit_advantage` along the direction towards the target.

    A coarse scan over the impact magnitude brackets the optimum, which is
    then polished by golden-section search.
    """
    delta = np.asarray(inst.x_des) - np.asarray(inst.x0)
    dist = float(np.linalg.norm(delta))
    if dist == 0.0:
        return np.zeros(2)
    e = delta / dist
    k = 2.0 * inst.m**2 * inst.mu * inst.g
    s_max = np.sqrt(2.0 * dist * k)

    def cost(s):
        return -hit_advantage(inst, np.multiply.outer(s, e))

    s = np.linspace(0.0, s_max, n_coarse)
    i = int(np.argmin(cost(s)))
    if i == 0:
        return np.zeros(2)
    lo, hi = s[i - 1], s[min(i + 1, n_coarse - 1)]
    res = minimize_scalar(lambda v: float(cost(v)), bracket=(lo, s[i], hi), method="golden",
                          options={"xtol": 1e-12})
    best = res.x if res.fun <= cost(s[i]) else s[i]
    return best * e


class HitEnv(Environment):
    """Single-decision hitting task over parameters ``(m, mu)``.

    The state is the start position, the action the planar impulse, and the
    decision reward is the hit advantage at the resting position, so with
    ``gamma = 0`` the advantage function equals the reward.
    """

    name = "hit"
    block_sizes = (2, 2, 2)

    def __init__(self, grids: DomainGrid, x_des=(0.0, 0.0), g: float = G, start_box=None):
        super().__init__(grids, gamma=0.0, dt=0.0, substeps=1, horizon=1)
        self.x_des = np.asarray(x_des, dtype=float)
        self.g = g
        self.start_box = np.asarray(start_box if start_box is not None else np.stack([self._lo, self._hi]))

    @classmethod
    def default(cls, n_param: int = 30, n_state: int = 30, n_action: int = 201) -> "HitEnv":
        grids = DomainGrid(
            [
                Grid("m", 0.2, 1.0, n_param),
                Grid("mu", 0.1, 0.5, n_param),
                Grid("x", -0.6, -0.3, n_state),
                Grid("y", -0.15, 0.15, n_state),
                Grid("I_x", 0.0, 1.8, n_action),
                Grid("I_y", -0.8, 0.8, n_action),
            ],
            2, 2, 2,
        )
        return cls(grids)

    def simulate(self, states, actions, params):
        states = as_batch(states, 2)
        actions = as_batch(actions, 2)
        params = as_batch(params, 2)
        nxt = slide(states, actions, params[:, 0], params[:, 1], self.g)
        err = nxt - self.x_des
        r = -(np.sum(err**2, axis=1) + IMPACT_COST * np.sum(actions**2, axis=1))
        return nxt, r

    def initial_states(self, rng, n):
        lo, hi = self.start_box
        return lo + (hi - lo) * rng.random((n, lo.size))

    def state_error(self, states):
        return np.linalg.norm(as_batch(states, 2) - self.x_des, axis=1)

    def instance(self, params, x0) -> HitInstance:
        return HitInstance(float(params[0]), float(params[1]), tuple(x0), tuple(self.x_des), self.g)

    def describe(self):
        return {**super().describe(), "x_des": self.x_des.tolist(), "g": self.g}
