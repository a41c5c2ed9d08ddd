"""Parametric control environments."""

from .base import Environment
from .hit import HitEnv, hit_optimal_impact
from .push import PushEnv
from .reorientation import ReorientationEnv

__all__ = ["Environment", "HitEnv", "PushEnv", "ReorientationEnv", "hit_optimal_impact"]
