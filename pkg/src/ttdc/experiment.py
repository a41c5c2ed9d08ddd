"""Rollouts of contracted policies and the normalized-reward report.

Evaluation protocol, per episode:

1. the true parameters are drawn uniformly in the parameter box and the
   start state from the environment;
2. for each width ``w`` a window of ``w`` grid nodes containing the node
   nearest to the true parameters is placed uniformly at random among the
   valid positions, per dimension, and its uniform distribution is
   contracted into the policy;
3. the domain-adaptation (DA) policy, contracted with a one-hot
   distribution at that nearest node, is rolled out from the same start.

The normalized reward of an episode is ``R_DA / R_w`` (rewards are
negative, so 1 means as good as DA).  ``w = 1`` is the DA policy itself and
gives exactly 1.  All widths share the episodes of a seed.
"""

from __future__ import annotations

import csv
import io as _io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .contraction import ParamDistribution, batch_actions, contracted_left_vectors
from .grid import DomainGrid
from .ttgo import SampleBudget
from .ttpi import PolicyModel

SUMMARY_FIELDS = ("schema", "environment", "w", "seed", "n_episodes", "reward_mean", "reward_std",
                  "error_mean", "error_std", "raw_reward_mean", "da_reward_mean")
EPISODE_FIELDS = ("schema", "environment", "w", "seed", "episode", "normalized_reward", "reward",
                  "da_reward", "final_error", "da_final_error")
SCHEMA = "ttdc-eval-1"


def window_widths(n: int) -> list:
    """``w`` in ``{1, N/20, N/5, N}`` rounded to integers, at least 1, deduplicated in order."""
    out = []
    for w in (1, max(1, int(round(n / 20))), max(1, int(round(n / 5))), n):
        if w not in out:
            out.append(w)
    return out


def sample_window(grids: DomainGrid, nearest, w: int, rng: np.random.Generator) -> ParamDistribution:
    """Uniform window of ``w`` nodes per dimension that contains ``nearest``, at a random offset."""
    ws = []
    for g, j in zip(grids.param_grids, nearest):
        n = g.n_points
        if w > n:
            raise ValueError(f"window width {w} exceeds {n} points of {g.label!r}")
        start = int(rng.integers(max(0, j - w + 1), min(j, n - w) + 1))
        wt = np.zeros(n)
        wt[start : start + w] = 1.0 / w
        ws.append(wt)
    return ParamDistribution(tuple(ws))


def window_center(grids: DomainGrid, dist: ParamDistribution) -> np.ndarray:
    """Mean node position of each dimension of a window distribution."""
    return np.array([float(g.points @ wt) for g, wt in zip(grids.param_grids, dist.weights)])


def rollout(env, model: PolicyModel, lefts: np.ndarray, params: np.ndarray, states: np.ndarray,
            budget: SampleBudget, seed: int = 0):
    """Roll out contracted policies row by row for ``env.horizon`` decisions.

    Row ``b`` acts with the contracted left vector ``lefts[b]`` and is
    simulated with the true parameters ``params[b]``.  Policies see states
    clamped into the grid box; the simulation itself is not clamped.
    Returns ``(cumulative_rewards, final_states)``.
    """
    x = np.array(states, dtype=float)
    total = np.zeros(len(x))
    for t in range(env.horizon):
        acts, _ = batch_actions(model, lefts, env.clamp_states(x), budget, seed + t)
        x, r = env.simulate(x, acts, params)
        total += r
    return total, x


def normalized(r_da: np.ndarray, r_w: np.ndarray) -> np.ndarray:
    """``R_DA / R_w`` per episode; two zero rewards count as 1."""
    r_da = np.asarray(r_da, dtype=float)
    r_w = np.asarray(r_w, dtype=float)
    out = np.ones_like(r_w)
    nz = r_w != 0
    out[nz] = r_da[nz] / r_w[nz]
    out[~nz & (r_da != 0)] = 0.0
    return out


@dataclass
class ExperimentReport:
    """Per-(environment, w, seed) aggregates and the per-episode records behind them."""

    rows: list = field(default_factory=list)
    episodes: list = field(default_factory=list)

    def pooled(self, environment: str, w: int, key: str = "normalized_reward"):
        vals = np.array([e[key] for e in self.episodes if e["environment"] == environment and e["w"] == w])
        return float(vals.mean()), float(vals.std())

    def widths(self, environment: str) -> list:
        return sorted({r["w"] for r in self.rows if r["environment"] == environment})

    def extend(self, other: "ExperimentReport") -> None:
        self.rows.extend(other.rows)
        self.episodes.extend(other.episodes)

    @staticmethod
    def _csv(records, fields) -> str:
        buf = _io.StringIO()
        wr = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        wr.writeheader()
        for rec in records:
            wr.writerow({k: _fmt(rec[k]) for k in fields})
        return buf.getvalue()

    def summary_csv(self) -> str:
        return self._csv(self.rows, SUMMARY_FIELDS)

    def episodes_csv(self) -> str:
        return self._csv(self.episodes, EPISODE_FIELDS)


def _fmt(v):
    return f"{v:.10g}" if isinstance(v, float) else v


def evaluate(env, model: PolicyModel, widths: Sequence[int] | None = None, episodes: int = 50,
             seeds: Sequence[int] = (0,), budget: SampleBudget = SampleBudget()) -> ExperimentReport:
    """Normalized reward and final-state error of window-contracted policies.

    The DA baseline is recomputed for every seed and episode, never cached.
    """
    if episodes < 1:
        raise ValueError("episodes must be positive")
    if model.grids.sizes != env.grids.sizes:
        raise ValueError(f"model grids {model.grids.sizes} do not match environment grids {env.grids.sizes}")
    g = model.grids
    sizes = g.sizes[: g.n_param]
    widths = window_widths(min(sizes)) if widths is None else [int(w) for w in widths]
    if any(w < 1 or w > min(sizes) for w in widths):
        raise ValueError(f"window widths must lie in [1, {min(sizes)}]")
    lo = np.array([gr.lower for gr in g.param_grids])
    hi = np.array([gr.upper for gr in g.param_grids])
    report = ExperimentReport()
    for seed in seeds:
        rng = np.random.default_rng(int(seed))
        true = lo + (hi - lo) * rng.random((episodes, len(sizes)))
        x0 = env.initial_states(rng, episodes)
        nearest = np.stack([gr.nearest_index(true[:, i]) for i, gr in enumerate(g.param_grids)], axis=1)
        dists = [ParamDistribution.one_hot(sizes, j) for j in nearest]
        for w in widths:
            dists += [sample_window(g, j, w, rng) for j in nearest]
        lefts = contracted_left_vectors(model, dists)
        k = len(widths) + 1
        rewards, finals = rollout(env, model, lefts, np.tile(true, (k, 1)), np.tile(x0, (k, 1)), budget, int(seed))
        err = env.state_error(finals)
        r_da, e_da = rewards[:episodes], err[:episodes]
        for wi, w in enumerate(widths):
            sl = slice((wi + 1) * episodes, (wi + 2) * episodes)
            r_w, e_w = rewards[sl], err[sl]
            norm = normalized(r_da, r_w)
            for e in range(episodes):
                report.episodes.append({
                    "schema": SCHEMA, "environment": env.name, "w": w, "seed": int(seed), "episode": e,
                    "normalized_reward": float(norm[e]), "reward": float(r_w[e]), "da_reward": float(r_da[e]),
                    "final_error": float(e_w[e]), "da_final_error": float(e_da[e]),
                })
            report.rows.append({
                "schema": SCHEMA, "environment": env.name, "w": w, "seed": int(seed), "n_episodes": episodes,
                "reward_mean": float(norm.mean()), "reward_std": float(norm.std()),
                "error_mean": float(e_w.mean()), "error_std": float(e_w.std()),
                "raw_reward_mean": float(r_w.mean()), "da_reward_mean": float(r_da.mean()),
            })
    return report
