"""Closed radial contours built from concatenated Bernstein (Bezier) segments.

The angle range ``[0, 2*pi)`` is split into ``n_segments`` equal arcs, each
carrying a degree-``p`` Bezier curve in the radius.  Segment control values
are ``C @ z`` for a vector ``z`` of ``n_segments * p`` free values: the last
control value of every segment is tied to the first one of the next segment
(and the last segment wraps to the first), so the contour is closed and C0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from ..errors import InvalidShapeError

TWO_PI = 2.0 * np.pi


def constraint_matrix(n_segments: int, degree: int) -> np.ndarray:
    """Map ``n_segments * degree`` free values to all segment control values.

    Rows are ordered segment by segment, ``degree + 1`` rows per segment.
    """
    if n_segments < 1 or degree < 1:
        raise ValueError("need at least one segment of degree >= 1")
    n_free = n_segments * degree
    c = np.zeros((n_segments * (degree + 1), n_free))
    for s in range(n_segments):
        for j in range(degree + 1):
            c[s * (degree + 1) + j, (s * degree + j) % n_free] = 1.0
    return c


def bernstein(degree: int, t) -> np.ndarray:
    """Bernstein basis values, shape ``t.shape + (degree + 1,)``."""
    t = np.asarray(t, dtype=float)[..., None]
    j = np.arange(degree + 1)
    return comb(degree, j) * t**j * (1.0 - t) ** (degree - j)


@dataclass(frozen=True)
class RadialShape:
    """Radius as a function of the contact angle ``psi``.

    Parameters
    ----------
    free : array_like
        ``n_segments * degree`` free control values (metres).
    n_segments : int
        Number of Bezier segments around the contour.
    degree : int
        Polynomial degree of every segment (3 for cubic).
    """

    free: tuple
    n_segments: int = 4
    degree: int = 3

    def __post_init__(self):
        free = tuple(float(v) for v in np.ravel(self.free))
        if len(free) != self.n_segments * self.degree:
            raise ValueError(
                f"expected {self.n_segments * self.degree} free values, got {len(free)}"
            )
        object.__setattr__(self, "free", free)

    @property
    def control_values(self) -> np.ndarray:
        """Per-segment control values, shape ``(n_segments, degree + 1)``."""
        w = constraint_matrix(self.n_segments, self.degree) @ np.array(self.free)
        return w.reshape(self.n_segments, self.degree + 1)

    @classmethod
    def circle(cls, radius: float, n_segments: int = 4, degree: int = 3) -> "RadialShape":
        return cls((radius,) * (n_segments * degree), n_segments, degree)

    @classmethod
    def fit(cls, radius_fn, n_segments: int = 4, degree: int = 3, n_samples: int = 720) -> "RadialShape":
        """Least-squares fit of the free values to samples of ``radius_fn(psi)``."""
        psi = np.linspace(0.0, TWO_PI, n_samples, endpoint=False)
        basis = _basis_matrix(psi, n_segments, degree) @ constraint_matrix(n_segments, degree)
        z, *_ = np.linalg.lstsq(basis, radius_fn(psi), rcond=None)
        return cls(tuple(z), n_segments, degree)

    @classmethod
    def rounded_rectangle(cls, half_x: float, half_y: float, exponent: float = 4.0,
                          n_segments: int = 4, degree: int = 3) -> "RadialShape":
        """Superellipse-like box with half extents ``half_x``, ``half_y``."""

        def radius(psi):
            c = np.abs(np.cos(psi)) / half_x
            s = np.abs(np.sin(psi)) / half_y
            return (c**exponent + s**exponent) ** (-1.0 / exponent)

        return cls.fit(radius, n_segments, degree)

    def __call__(self, psi) -> np.ndarray:
        return radial_shape(self, psi)


def _basis_matrix(psi: np.ndarray, n_segments: int, degree: int) -> np.ndarray:
    """Rows map stacked segment control values to ``r(psi)``."""
    seg, t = _segment_coords(psi, n_segments)
    b = bernstein(degree, t)
    out = np.zeros((psi.size, n_segments * (degree + 1)))
    cols = seg[:, None] * (degree + 1) + np.arange(degree + 1)
    np.put_along_axis(out, cols, b, axis=1)
    return out


def _segment_coords(psi, n_segments: int):
    u = np.mod(np.asarray(psi, dtype=float).ravel(), TWO_PI) / TWO_PI * n_segments
    seg = np.minimum(np.floor(u).astype(np.int64), n_segments - 1)
    return seg, u - seg


def radial_shape(shape: RadialShape, psi) -> np.ndarray | float:
    """Radius ``r(psi)``; ``psi`` is wrapped to ``[0, 2*pi)``.

    Raises
    ------
    InvalidShapeError
        If the radius is not strictly positive at some requested angle.
    """
    psi_arr = np.asarray(psi, dtype=float)
    seg, t = _segment_coords(psi_arr, shape.n_segments)
    w = shape.control_values[seg]
    r = np.sum(w * bernstein(shape.degree, t), axis=-1)
    if np.any(r <= 0):
        raise InvalidShapeError(f"nonpositive radius {r.min():.3g} for this shape")
    r = r.reshape(psi_arr.shape)
    return float(r) if r.ndim == 0 else r
