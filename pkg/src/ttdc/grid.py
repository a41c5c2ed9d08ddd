"""Uniform discretizations of the (parameter, state, action) domain."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Grid:
    """Uniform 1-D grid ``lower + k * (upper - lower) / (n_points - 1)``.

    A single-point grid (``n_points == 1``) is only available through
    :meth:`Grid.singleton`; it stands for a degenerate block that is fixed
    to one value.
    """

    label: str
    lower: float
    upper: float
    n_points: int

    def __post_init__(self):
        n = int(self.n_points)
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        if n == 1:
            if self.lower != self.upper:
                raise ValueError(f"grid {self.label!r}: a 1-point grid needs lower == upper")
            return
        if n < 2:
            raise ValueError(f"grid {self.label!r}: n_points must be >= 2, got {n}")
        if not self.lower < self.upper:
            raise ValueError(f"grid {self.label!r}: lower must be < upper")

    @classmethod
    def singleton(cls, label: str, value: float) -> "Grid":
        return cls(label, value, value, 1)

    @classmethod
    def from_points(cls, label: str, points: Sequence[float], rtol: float = 1e-9) -> "Grid":
        """Build a grid from explicit nodes, rejecting non-uniform spacing."""
        pts = np.asarray(points, dtype=float)
        if pts.size == 1:
            return cls.singleton(label, float(pts[0]))
        steps = np.diff(pts)
        if np.any(steps <= 0) or np.ptp(steps) > rtol * abs(steps.mean()):
            raise ValueError(f"grid {label!r}: only uniform increasing grids are supported")
        return cls(label, pts[0], pts[-1], pts.size)

    @property
    def step(self) -> float:
        if self.n_points == 1:
            return 0.0
        return (self.upper - self.lower) / (self.n_points - 1)

    @property
    def points(self) -> np.ndarray:
        if self.n_points == 1:
            return np.array([self.lower])
        return np.linspace(self.lower, self.upper, self.n_points)

    def point(self, k):
        return self.lower + np.asarray(k) * self.step

    def nearest_index(self, x) -> np.ndarray:
        """Nearest node index; exact midpoints round down."""
        if self.n_points == 1:
            return np.zeros(np.shape(x), dtype=np.int64)
        t = (np.asarray(x, dtype=float) - self.lower) / self.step
        idx = np.ceil(t - 0.5).astype(np.int64)
        return np.clip(idx, 0, self.n_points - 1)

    def clamp(self, x):
        return np.clip(x, self.lower, self.upper)

    def locate(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Cell index ``i`` and fraction ``t`` with ``x = (1-t) x_i + t x_{i+1}``.

        Raises :class:`DomainError` for coordinates outside ``[lower, upper]``
        (a relative slack of 1e-9 absorbs round-off).
        """
        x = np.asarray(x, dtype=float)
        if self.n_points == 1:
            if np.any(np.abs(x - self.lower) > 1e-9 * max(1.0, abs(self.lower))):
                raise DomainError(f"{self.label}: value outside singleton grid {self.lower}")
            return np.zeros(x.shape, dtype=np.int64), np.zeros(x.shape)
        slack = 1e-9 * (self.upper - self.lower)
        if np.any(~np.isfinite(x)) or np.any(x < self.lower - slack) or np.any(x > self.upper + slack):
            bad = x[(x < self.lower - slack) | (x > self.upper + slack) | ~np.isfinite(x)]
            raise DomainError(
                f"{self.label}: coordinate {bad.ravel()[0]!r} outside [{self.lower}, {self.upper}]"
            )
        t = (np.clip(x, self.lower, self.upper) - self.lower) / self.step
        i = np.minimum(np.floor(t).astype(np.int64), self.n_points - 2)
        return i, t - i


@dataclass(frozen=True)
class DomainGrid:
    """Ordered grids split into parameter, state and action blocks."""

    grids: tuple
    n_param: int
    n_state: int
    n_action: int = 0
    _sizes: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "grids", tuple(self.grids))
        if self.n_param < 0 or self.n_state < 0 or self.n_action < 0:
            raise ValueError("block sizes must be nonnegative")
        if self.n_param + self.n_state + self.n_action != len(self.grids):
            raise ValueError(
                f"block sizes {self.n_param}+{self.n_state}+{self.n_action} "
                f"do not add up to {len(self.grids)} grids"
            )
        object.__setattr__(self, "_sizes", tuple(g.n_points for g in self.grids))

    def __len__(self):
        return len(self.grids)

    def __getitem__(self, k):
        return self.grids[k]

    def __iter__(self):
        return iter(self.grids)

    @property
    def sizes(self) -> tuple:
        return self._sizes

    @property
    def labels(self) -> tuple:
        return tuple(g.label for g in self.grids)

    @property
    def param_grids(self) -> tuple:
        return self.grids[: self.n_param]

    @property
    def state_grids(self) -> tuple:
        return self.grids[self.n_param : self.n_param + self.n_state]

    @property
    def action_grids(self) -> tuple:
        return self.grids[self.n_param + self.n_state :]

    def without_actions(self) -> "DomainGrid":
        return DomainGrid(self.grids[: self.n_param + self.n_state], self.n_param, self.n_state, 0)

    def tail(self, k: int) -> "DomainGrid":
        """Grid over dimensions ``k:``, with block sizes adjusted."""
        p = max(self.n_param - k, 0)
        s = max(self.n_state - max(k - self.n_param, 0), 0)
        a = len(self.grids) - k - p - s
        return DomainGrid(self.grids[k:], p, s, a)

    def index_to_point(self, idx) -> np.ndarray:
        idx = np.asarray(idx)
        return np.stack([g.point(idx[..., k]) for k, g in enumerate(self.grids)], axis=-1)

    def clamp(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        lo = np.array([g.lower for g in self.grids])
        hi = np.array([g.upper for g in self.grids])
        return np.clip(points, lo, hi)
