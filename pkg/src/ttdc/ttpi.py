"""Policy iteration with value and advantage functions held as tensor trains.

Both functions live on the parameter-augmented domain: the value ``V`` over
``(alpha, x)`` and the advantage ``A`` over ``(alpha, x, u)``, always in
that dimension order.  Each iteration fits

* the one-step Bellman backup ``V'(alpha, x) = max_u R + gamma V(f(x, u | alpha) | alpha)``,
  where candidate actions are drawn by TTGO from the current advantage and
  scored with the true dynamics, and
* the advantage ``A(alpha, x, u) = R + gamma (V(f) - V(x))`` of the new value,

by TT-cross.  The policy is implicit: ``pi(x | alpha) = argmax_u A``.
"""

from __future__ import annotations

import logging
import os
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import io
from .cross import CrossConfig, CrossResult, NotConvergedWarning, cross_approximate, on_grid
from .errors import CrossEvaluationError, ShapeError
from .grid import DomainGrid
from .tt import TensorTrain, chain_indices, chain_points
from .ttgo import SampleBudget, argmax_batch, candidates_batch

log = logging.getLogger(__name__)


class PolicyIterationError(RuntimeError):
    """TT-cross failed inside policy iteration; ``iteration`` says where."""

    def __init__(self, iteration: int, stage: str, cause: Exception):
        super().__init__(f"{stage} fit failed at iteration {iteration}: {cause}")
        self.iteration = iteration
        self.stage = stage


@dataclass(frozen=True)
class TtpiConfig:
    """Settings of :func:`policy_iteration`.

    ``gamma`` may be 0 for single-decision tasks; the advantage then equals
    the reward and no value function is fitted.
    """

    gamma: float = 0.99
    max_iterations: int = 30
    value_tolerance: float = 1e-3
    cross: CrossConfig = CrossConfig()
    value_cross: CrossConfig | None = None
    inner_budget: SampleBudget = SampleBudget(n_samples=50, polish=0)
    backup_candidates: int = 8
    warm_start: bool = True
    validation_samples: int = 512
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.value_tolerance > 0:
            raise ValueError("value_tolerance must be positive")
        if self.backup_candidates < 1:
            raise ValueError("backup_candidates must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PolicyModel:
    """Advantage train over ``(alpha, x, u)`` plus its grids.

    ``value`` holds the last value train over ``(alpha, x)`` when one was
    fitted; it is not part of the model file.
    """

    grids: DomainGrid
    advantage: TensorTrain
    metadata: dict = field(default_factory=dict)
    value: TensorTrain | None = field(default=None, repr=False)
    train_seconds: float = field(default=0.0, repr=False)

    def __post_init__(self):
        if self.advantage.shape != self.grids.sizes:
            raise ShapeError(f"advantage shape {self.advantage.shape} does not match grids {self.grids.sizes}")

    @property
    def n_param(self) -> int:
        return self.grids.n_param

    def save(self, path: str | os.PathLike) -> None:
        io.save(path, self.advantage, self.grids, self.metadata)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "PolicyModel":
        tt, grids, meta = io.load(path)
        return cls(grids, tt, meta)


def _value_at(v: TensorTrain, grids, points: np.ndarray) -> np.ndarray:
    return chain_points(v.cores, grids, points)[:, 0]


def advantage_from_value(env, v: TensorTrain, gamma: float | None = None) -> Callable[[np.ndarray], np.ndarray]:
    """``A(alpha, x, u) = R + gamma (V(clamp(f(x, u | alpha)) | alpha) - V(x | alpha))``.

    Returns a function of real points ``(B, d + m + n)``.
    """
    gamma = env.gamma if gamma is None else gamma
    g = env.grids
    d, m = g.n_param, g.n_state
    vgrids = g.without_actions().grids
    if v.shape != tuple(gg.n_points for gg in vgrids):
        raise ShapeError(f"value shape {v.shape} does not match (alpha, x) grids")

    def fn(points):
        points = np.atleast_2d(points)
        alpha, x, u = points[:, :d], points[:, d : d + m], points[:, d + m :]
        nxt, r = env.transition(x, u, alpha)
        if gamma == 0.0:
            return r
        v_next = _value_at(v, vgrids, np.concatenate([alpha, nxt], axis=1))
        v_now = _value_at(v, vgrids, points[:, : d + m])
        return r + gamma * (v_next - v_now)

    return fn


def bellman_backup(env, a: TensorTrain, v: TensorTrain, gamma: float, budget: SampleBudget, seed: int,
                   n_score: int | None = None):
    """Index function for ``max_u R + gamma V(f)`` over the ``(alpha, x)`` grid.

    TTGO draws candidate actions from ``A`` conditioned on each row; the
    ``n_score`` candidates with the largest ``A`` (all when ``None``) are
    scored with the true transition and the best score is kept.
    """
    g = env.grids
    d, m = g.n_param, g.n_state
    dp = d + m
    vgrid = g.without_actions()
    action_grids = g.action_grids
    a_cores = a.cores

    def f(idx):
        idx = np.asarray(idx)
        left = chain_indices(a_cores[:dp], idx)
        cand, vals = candidates_batch(left, a_cores[dp:], action_grids, budget, seed)
        b, s, _ = cand.shape
        if n_score is not None and n_score < s:
            keep = np.argsort(-vals, axis=1, kind="stable")[:, :n_score]
            cand = np.take_along_axis(cand, keep[..., None], axis=1)
            s = n_score
        acts = np.stack([gr.point(cand[..., k]) for k, gr in enumerate(action_grids)], axis=-1)
        pts = np.repeat(vgrid.index_to_point(idx), s, axis=0)
        alpha, x = pts[:, :d], pts[:, d:]
        nxt, r = env.transition(x, acts.reshape(b * s, -1), alpha)
        q = r + gamma * _value_at(v, vgrid.grids, np.concatenate([alpha, nxt], axis=1))
        return q.reshape(b, s).max(axis=1)

    return f


def _fit(fn, grids, cfg: CrossConfig, stage: str, iteration: int, init: CrossResult | None = None) -> CrossResult:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConvergedWarning)
        try:
            res = cross_approximate(fn, grids, cfg, init=init)
        except CrossEvaluationError as exc:
            raise PolicyIterationError(iteration, stage, exc) from exc
    if not res.converged:
        log.warning("%s fit at iteration %d: validation error %.3e above eps %.1e",
                    stage, iteration, res.error, cfg.eps)
    return res


def _mean_best_advantage(a: TensorTrain, grids: DomainGrid, val_idx, budget, seed) -> float:
    dp = grids.n_param + grids.n_state
    left = chain_indices(a.cores[:dp], val_idx)
    _, vals = argmax_batch(left, a.cores[dp:], grids.action_grids, budget, seed)
    return float(np.mean(vals))


def policy_iteration(env, cfg: TtpiConfig = TtpiConfig()) -> PolicyModel:
    """Fit the parameter-augmented value and advantage trains of ``env``.

    Starts from ``V = 0`` and stops once the relative change of ``V`` on a
    fixed set of validation indices drops below ``cfg.value_tolerance`` or
    after ``cfg.max_iterations`` iterations.
    """
    grids = env.grids
    vgrid = grids.without_actions()
    vcfg = cfg.value_cross or cfg.cross
    rng = np.random.default_rng(cfg.seed)
    val_idx = rng.integers(0, vgrid.sizes, size=(cfg.validation_samples, len(vgrid)))
    t0 = time.perf_counter()

    v = TensorTrain.constant(vgrid.sizes, 0.0)
    history = []
    a_res = _fit(on_grid(advantage_from_value(env, v, cfg.gamma), grids),
                 grids, _reseed(cfg.cross, cfg.seed, 0), "advantage", 0)
    a = a_res.tt
    history.append(_record(0, None, a_res, None))
    log.info("iteration=0 adv_rank=%d adv_err=%.3e", a_res.max_rank, a_res.error)

    prev_gain = None
    if cfg.gamma > 0.0:
        v_val = np.zeros(len(val_idx))
        v_res = None
        for it in range(1, cfg.max_iterations + 1):
            backup = bellman_backup(env, a, v, cfg.gamma, cfg.inner_budget, cfg.seed + it, cfg.backup_candidates)
            v_res = _fit(backup, vgrid, _reseed(vcfg, cfg.seed, 2 * it - 1), "value", it,
                         v_res if cfg.warm_start else None)
            v_new = v_res.tt
            new_val = chain_indices(v_new.cores, val_idx)[:, 0]
            denom = np.linalg.norm(new_val)
            change = np.linalg.norm(new_val - v_val) / denom if denom > 0 else np.linalg.norm(new_val - v_val)
            v, v_val = v_new, new_val
            a_res = _fit(on_grid(advantage_from_value(env, v, cfg.gamma), grids),
                         grids, _reseed(cfg.cross, cfg.seed, 2 * it), "advantage", it,
                         a_res if cfg.warm_start else None)
            a = a_res.tt
            gain = _mean_best_advantage(a, grids, val_idx, cfg.inner_budget, cfg.seed)
            if prev_gain is not None and gain < prev_gain - 3 * cfg.cross.eps * max(abs(prev_gain), 1e-12):
                warnings.warn(f"mean best advantage decreased at iteration {it}: {prev_gain:.4g} -> {gain:.4g}",
                              RuntimeWarning, stacklevel=2)
            prev_gain = gain
            history.append(_record(it, v_res, a_res, change))
            log.info(
                "iteration=%d value_rank=%d value_err=%.3e adv_rank=%d adv_err=%.3e change=%.3e",
                it, v_res.max_rank, v_res.error, a_res.max_rank, a_res.error, change,
            )
            if change < cfg.value_tolerance:
                break

    elapsed = time.perf_counter() - t0
    meta = {
        "kind": "policy",
        "environment": env.describe(),
        "config": cfg.to_dict(),
        "history": history,
    }
    return PolicyModel(grids, a, meta, value=v if cfg.gamma > 0.0 else None, train_seconds=elapsed)


def _reseed(cfg: CrossConfig, seed: int, k: int) -> CrossConfig:
    return CrossConfig(cfg.eps, cfg.r_max, cfg.max_sweeps, cfg.kick_rank, cfg.validation_samples,
                       seed=int(cfg.seed + 1000 * seed + k))


def _record(it, v_res, a_res, change) -> dict:
    rec = {"iteration": it, "advantage_error": a_res.error, "advantage_ranks": list(a_res.tt.ranks),
           "advantage_evals": a_res.n_evals}
    if v_res is not None:
        rec.update(value_error=v_res.error, value_ranks=list(v_res.tt.ranks),
                   value_evals=v_res.n_evals, value_change=float(change))
    return rec


def _split(model: PolicyModel, params, states):
    g = model.grids
    params = np.atleast_2d(np.asarray(params, dtype=float))
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if params.shape[1] != g.n_param or states.shape[1] != g.n_state:
        raise ShapeError(f"expected {g.n_param} parameters and {g.n_state} state coordinates")
    return np.concatenate([params, states], axis=1)


def greedy_actions(model: PolicyModel, params, states, budget: SampleBudget = SampleBudget(), seed: int = 0):
    """Batched :func:`greedy_action`: returns ``(actions (B, n), values (B,))``."""
    g = model.grids
    dp = g.n_param + g.n_state
    prefix = _split(model, params, states)
    left = chain_points(model.advantage.cores[:dp], g.grids[:dp], prefix)
    return argmax_batch(left, model.advantage.cores[dp:], g.action_grids, budget, seed)


def greedy_action(model: PolicyModel, params, state, budget: SampleBudget = SampleBudget(), seed: int = 0) -> np.ndarray:
    """``argmax_u A(alpha, x, u)`` by conditioning on ``(params, state)`` and TTGO.

    Raises :class:`~ttdc.errors.DomainError` for inputs outside the grids.
    """
    actions, _ = greedy_actions(model, params, state, budget, seed)
    return actions[0]
