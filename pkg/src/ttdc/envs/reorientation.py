"""In-hand reorientation of a pivoting object braked by gripper friction.

The object swings about the grasp axis like a pendulum with inertia
``I = m l^2``; ``theta = 0`` hangs down and ``theta = pi`` is the upright
goal.  Gravity acts as ``-m g l sin(theta)`` and the two finger contacts
each apply a torsional friction torque of magnitude ``mu_t f_n``.

Friction is treated as Coulomb: it only opposes motion, never reverses
it within a step, and holds the object at rest while gravity stays below
the available friction torque.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..grid import DomainGrid, Grid
from .base import Environment, as_batch
from .push import wrap_angle

G = 9.81
BETA = 1e4
THETA_DES = np.pi


@dataclass(frozen=True)
class ReoriInstance:
    m: float
    l: float
    mu_t: float
    theta_dot0: float = 20.0
    gamma_exp: float = 0.0
    beta: float = BETA
    theta_des: float = THETA_DES
    dt: float = 1e-3
    g: float = G

    def __post_init__(self):
        if not (self.m > 0 and self.l > 0 and self.mu_t > 0):
            raise ValueError("m, l and mu_t must be positive")

    @property
    def inertia(self) -> float:
        return self.m * self.l**2


def _step(theta, theta_dot, f_n, m, l, mu_t, gamma_exp, g, dt):
    inertia = m * l**2
    acc_g = -m * g * l * np.sin(theta) / inertia
    acc_f = 2.0 * mu_t * f_n ** (1.0 + gamma_exp) / inertia
    free = theta_dot + acc_g * dt
    # friction removes at most acc_f * dt of speed and stops at zero
    stopped = np.abs(free) <= acc_f * dt
    new_dot = np.where(stopped, 0.0, free - np.sign(free) * acc_f * dt)
    return theta + new_dot * dt, new_dot


def reori_step(inst: ReoriInstance, state, f_n, dt: float | None = None) -> np.ndarray:
    """Semi-implicit Euler step of ``(theta, theta_dot)`` under normal force ``f_n``."""
    f_n = np.asarray(f_n, dtype=float)
    if np.any(f_n < 0):
        raise DomainError("normal force must be nonnegative")
    dt = inst.dt if dt is None else dt
    single = np.ndim(state) == 1
    x = as_batch(state, 2)
    th, thd = _step(x[:, 0], x[:, 1], f_n.reshape(-1), inst.m, inst.l, inst.mu_t, inst.gamma_exp, inst.g, dt)
    out = np.stack([th, thd], axis=1)
    return out[0] if single else out


def reori_energy(inst: ReoriInstance, state) -> np.ndarray:
    """``I theta_dot^2 / 2 - m g l cos(theta)``."""
    x = as_batch(state, 2)
    return 0.5 * inst.inertia * x[:, 1] ** 2 - inst.m * inst.g * inst.l * np.cos(x[:, 0])


def reori_reward(inst: ReoriInstance, theta, f_n):
    """``-(beta |theta - pi| + |f_n|)`` with the angle difference wrapped."""
    val = -(inst.beta * np.abs(wrap_angle(np.asarray(theta) - inst.theta_des)) + np.abs(f_n))
    return float(val) if np.ndim(val) == 0 else val


class ReorientationEnv(Environment):
    """Reorientation over parameters ``(m, l, mu_t)``; the action is ``f_n``."""

    name = "reorientation"
    block_sizes = (3, 2, 1)

    def __init__(self, grids: DomainGrid, gamma: float = 0.99, dt: float = 1e-3, substeps: int = 20,
                 horizon: int = 100, theta_dot0: float = 20.0, beta: float = BETA, g: float = G):
        super().__init__(grids, gamma, dt, substeps, horizon)
        self.theta_dot0 = float(theta_dot0)
        self.beta = float(beta)
        self.g = g

    @classmethod
    def default(cls, n_param: int = 30, n_state: int = 50, n_action: int = 31) -> "ReorientationEnv":
        grids = DomainGrid(
            [
                Grid("m", 0.1, 0.3, n_param),
                Grid("l", 0.15, 0.3, n_param),
                Grid("mu_t", 0.05, 0.15, n_param),
                Grid("theta", -np.pi / 2, 3 * np.pi / 2, n_state),
                Grid("theta_dot", -10.0, 25.0, n_state),
                Grid("f_n", 0.0, 10.0, n_action),
            ],
            3, 2, 1,
        )
        return cls(grids)

    def simulate(self, states, actions, params):
        x = as_batch(states, 2)
        f_n = np.maximum(as_batch(actions, 1)[:, 0], 0.0)
        p = as_batch(params, 3)
        th, thd = x[:, 0].copy(), x[:, 1].copy()
        total = np.zeros(x.shape[0])
        for _ in range(self.substeps):
            total -= self.beta * np.abs(wrap_angle(th - THETA_DES)) + f_n
            th, thd = _step(th, thd, f_n, p[:, 0], p[:, 1], p[:, 2], 0.0, self.g, self.dt)
        return np.stack([th, thd], axis=1), total

    def initial_states(self, rng, n):
        return np.tile([0.0, self.theta_dot0], (n, 1))

    def state_error(self, states):
        return np.abs(wrap_angle(as_batch(states, 2)[:, 0] - THETA_DES))

    def instance(self, params) -> ReoriInstance:
        return ReoriInstance(float(params[0]), float(params[1]), float(params[2]),
                             theta_dot0=self.theta_dot0, beta=self.beta, dt=self.dt, g=self.g)

    def describe(self):
        return {**super().describe(), "theta_dot0": self.theta_dot0, "beta": self.beta, "g": self.g}
