"""Quasi-static planar pushing with an ellipsoidal limit surface.

The pusher force ``f`` acts at the contact point ``p(psi, phi)`` of a
radially parameterized object.  The wrench ``w = J^T f`` maps to a body
twist ``t = L w`` with ``L = diag(1/f_max, 1/f_max, 1/m_max)``, which is
rotated into the world frame.  The pusher moves kinematically with
``(psi_dot, phi_dot)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..grid import DomainGrid, Grid
from .base import Environment, as_batch
from .shape import RadialShape, radial_shape

L_P = 0.005
L_O = 0.01 * np.pi
FORCE_COST = 0.01
VELOCITY_COST = 0.01


def wrap_angle(a):
    """Wrap to ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2.0 * np.pi)


@dataclass(frozen=True)
class PushInstance:
    f_max: float
    m_max: float
    shape: RadialShape = field(default_factory=lambda: RadialShape.rounded_rectangle(0.05, 0.03))
    l_p: float = L_P
    l_o: float = L_O
    rho: float = 1.0

    def __post_init__(self):
        if not self.f_max > 0 or not self.m_max > 0:
            raise ValueError("f_max and m_max must be positive")


def contact_point(shape: RadialShape, psi, phi) -> np.ndarray:
    """Contact position in the object frame, shape ``psi.shape + (2,)``."""
    rad = np.asarray(radial_shape(shape, psi)) + phi
    return np.stack([rad * np.cos(psi), rad * np.sin(psi)], axis=-1)


def body_twist(shape: RadialShape, psi, phi, force, f_max, m_max) -> np.ndarray:
    """``L J^T f`` for batches of contact states and forces."""
    p = contact_point(shape, psi, phi)
    fx, fy = force[..., 0], force[..., 1]
    tau = -p[..., 1] * fx + p[..., 0] * fy
    return np.stack([fx / f_max, fy / f_max, tau / m_max], axis=-1)


def _euler(shape, states, actions, f_max, m_max, dt):
    sx, sy, th, psi, phi = states.T
    t = body_twist(shape, psi, phi, actions[:, :2], f_max, m_max)
    c, s = np.cos(th), np.sin(th)
    out = np.empty_like(states)
    out[:, 0] = sx + (c * t[:, 0] - s * t[:, 1]) * dt
    out[:, 1] = sy + (s * t[:, 0] + c * t[:, 1]) * dt
    out[:, 2] = th + t[:, 2] * dt
    psi = psi + actions[:, 2] * dt
    # wrapping in range values would perturb them by an ulp
    out[:, 3] = np.where((psi > -np.pi) & (psi <= np.pi), psi, wrap_angle(psi))
    out[:, 4] = np.maximum(phi + actions[:, 3] * dt, 0.0)
    return out


def push_step(inst: PushInstance, state, action, dt: float) -> np.ndarray:
    """One explicit Euler step of ``[s_x, s_y, s_theta, psi, phi]``.

    ``psi`` is wrapped to ``(-pi, pi]`` and ``phi`` clamped at zero.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    single = np.ndim(state) == 1
    out = _euler(inst.shape, as_batch(state, 5), as_batch(action, 4), inst.f_max, inst.m_max, dt)
    return out[0] if single else out


def _reward(states, actions, rho, l_p, l_o):
    c_p = np.hypot(states[:, 0], states[:, 1]) / l_p
    c_o = np.abs(wrap_angle(states[:, 2])) / l_o
    c_f = np.hypot(actions[:, 0], actions[:, 1])
    c_v = np.hypot(actions[:, 2], actions[:, 3])
    return -(rho * c_p + c_o + FORCE_COST * c_f + VELOCITY_COST * c_v)


def push_reward(inst: PushInstance, state, action):
    """``-(rho c_p + c_o + 0.01 c_f + 0.01 c_v)`` with the target at the origin."""
    single = np.ndim(state) == 1
    r = _reward(as_batch(state, 5), as_batch(action, 4), inst.rho, inst.l_p, inst.l_o)
    return float(r[0]) if single else r


class PushEnv(Environment):
    """Pushing over parameters ``(f_max, m_max)``.

    A decision holds the action for ``substeps`` Euler steps of length
    ``dt``; its reward sums the per-step rewards, each taken before the step.
    """

    name = "push"
    block_sizes = (2, 5, 4)

    def __init__(self, grids: DomainGrid, shape: RadialShape | None = None, gamma: float = 0.99,
                 dt: float = 0.01, substeps: int = 5, horizon: int = 60, rho: float = 1.0,
                 start_box=None):
        super().__init__(grids, gamma, dt, substeps, horizon)
        self.shape = shape if shape is not None else RadialShape.rounded_rectangle(0.05, 0.03)
        self.rho = float(rho)
        self.start_box = np.asarray(start_box if start_box is not None else np.stack([self._lo, self._hi]))

    @classmethod
    def default(cls, n_param: int = 50, n_state: int = 30, n_action: int = 31) -> "PushEnv":
        grids = DomainGrid(
            [
                Grid("f_max", 0.5, 2.0, n_param),
                Grid("m_max", 0.005, 0.02, n_param),
                Grid("s_x", -0.05, 0.05, n_state),
                Grid("s_y", -0.05, 0.05, n_state),
                Grid("s_theta", -np.pi / 4, np.pi / 4, n_state),
                Grid("psi", -np.pi, np.pi, n_state),
                Grid("phi", 0.0, 0.02, n_state),
                Grid("f_x", -0.3, 0.3, n_action),
                Grid("f_y", -0.3, 0.3, n_action),
                Grid("psi_dot", -np.pi, np.pi, n_action),
                Grid("phi_dot", -0.05, 0.05, n_action),
            ],
            2, 5, 4,
        )
        return cls(grids)

    def simulate(self, states, actions, params):
        x = as_batch(states, 5)
        u = as_batch(actions, 4)
        params = as_batch(params, 2)
        total = np.zeros(x.shape[0])
        for _ in range(self.substeps):
            total += _reward(x, u, self.rho, L_P, L_O)
            x = _euler(self.shape, x, u, params[:, 0], params[:, 1], self.dt)
        return x, total

    def initial_states(self, rng, n):
        lo, hi = self.start_box
        return lo + (hi - lo) * rng.random((n, lo.size))

    def state_error(self, states):
        x = as_batch(states, 5)
        return np.sqrt(x[:, 0] ** 2 + x[:, 1] ** 2 + wrap_angle(x[:, 2]) ** 2)

    def instance(self, params) -> PushInstance:
        return PushInstance(float(params[0]), float(params[1]), self.shape, rho=self.rho)

    def describe(self):
        return {**super().describe(), "rho": self.rho, "shape": list(self.shape.free),
                "n_segments": self.shape.n_segments, "degree": self.shape.degree}
