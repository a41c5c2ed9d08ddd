"""Experiment configuration files.

An INI-style file with the sections below (``#`` starts a comment)::

    [environment]
    name = push            # hit | push | reorientation
    horizon = 60           # decisions per episode (optional)

    [grid]
    # label = block lower upper n_points ; block is param, state or action
    f_max = param 0.5 2.0 50

    [cross]                # TT-cross settings for every fit
    [ttpi]                 # policy iteration settings
    [policy]               # TTGO budget used when acting
    [eval]                 # episodes and seeds of the evaluation

Grid lines of each block keep their order and blocks are stacked as
``param, state, action``.  Errors carry the line number of the offending
entry.
"""

from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, field

from .cross import CrossConfig
from .envs.base import Environment
from .envs.hit import HitEnv
from .envs.push import PushEnv
from .envs.reorientation import ReorientationEnv
from .envs.shape import RadialShape
from .errors import ConfigError
from .grid import DomainGrid, Grid
from .ttgo import SampleBudget
from .ttpi import TtpiConfig

BLOCKS = ("param", "state", "action")
ENVIRONMENTS = {"hit": (HitEnv, (2, 2, 2)), "push": (PushEnv, (2, 5, 4)),
                "reorientation": (ReorientationEnv, (3, 2, 1))}

_CROSS_KEYS = {"eps", "r_max", "max_sweeps", "kick_rank", "validation_samples", "seed"}
KNOWN_KEYS = {
    "environment": {"name", "gamma", "dt", "substeps", "horizon", "x_des", "rho", "shape_half_extents",
                    "theta_dot0", "beta", "start_box"},
    "cross": _CROSS_KEYS,
    "value_cross": _CROSS_KEYS,
    "ttpi": {"max_iterations", "value_tolerance", "backup_candidates", "warm_start", "validation_samples", "seed",
             "inner_samples", "inner_polish", "inner_priority", "inner_refine"},
    "policy": {"samples", "polish", "priority", "refine"},
    "eval": {"episodes", "seeds"},
}

_SECTION = re.compile(r"^\s*\[([^\]]+)\]")
_KEY = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


@dataclass
class ExperimentConfig:
    """Everything needed to train and evaluate one environment."""

    environment: Environment
    ttpi: TtpiConfig
    policy_budget: SampleBudget = SampleBudget()
    episodes: int = 50
    seeds: tuple = (0, 1, 2)
    source: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def grids(self) -> DomainGrid:
        return self.environment.grids


def _line_index(text: str) -> dict:
    out, section = {}, None
    for no, line in enumerate(text.splitlines(), start=1):
        m = _SECTION.match(line)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), no)
            continue
        m = _KEY.match(line)
        if m and section is not None:
            key = m.group(1).strip()
            out.setdefault((section, key if section == "grid" else key.lower()), no)
    return out


class _Reader:
    def __init__(self, parser: configparser.ConfigParser, lines: dict):
        self.parser = parser
        self.lines = lines

    def line(self, section, key=None):
        return self.lines.get((section, key), self.lines.get((section, None)))

    def error(self, section, key, msg):
        name = f"{section}.{key}" if key else section
        return ConfigError(f"{name}: {msg}", self.line(section, key), name)

    def get(self, section, key, conv=str, default=None, required=False):
        if not self.parser.has_option(section, key):
            if required:
                raise self.error(section, key, "missing required entry")
            return default
        raw = self.parser.get(section, key)
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            raise self.error(section, key, f"cannot parse {raw!r}: {exc}") from None

    def check(self, section, key, ok, msg):
        if not ok:
            raise self.error(section, key, msg)


def _ints(raw: str) -> tuple:
    return tuple(int(v) for v in raw.replace(",", " ").split())


def _floats(raw: str) -> tuple:
    return tuple(float(v) for v in raw.replace(",", " ").split())


def _grids(rd: _Reader) -> DomainGrid:
    if not rd.parser.has_section("grid"):
        raise ConfigError("missing [grid] section", None, "grid")
    blocks = {b: [] for b in BLOCKS}
    for label, raw in rd.parser.items("grid"):
        parts = raw.split()
        rd.check("grid", label, len(parts) == 4, "expected 'block lower upper n_points'")
        block = parts[0].lower()
        rd.check("grid", label, block in BLOCKS, f"block must be one of {', '.join(BLOCKS)}, got {parts[0]!r}")
        try:
            lo, hi, n = float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError as exc:
            raise rd.error("grid", label, str(exc)) from None
        rd.check("grid", label, n >= 2, f"n_points must be >= 2, got {n}")
        rd.check("grid", label, lo < hi, "lower must be < upper")
        blocks[block].append(Grid(label, lo, hi, n))
    return DomainGrid(blocks["param"] + blocks["state"] + blocks["action"],
                      len(blocks["param"]), len(blocks["state"]), len(blocks["action"]))


def _environment(rd: _Reader, grids: DomainGrid) -> Environment:
    sec = "environment"
    name = rd.get(sec, "name", str, required=True).strip().lower()
    rd.check(sec, "name", name in ENVIRONMENTS, f"unknown environment {name!r}")
    cls, counts = ENVIRONMENTS[name]
    have = (grids.n_param, grids.n_state, grids.n_action)
    if have != counts:
        raise ConfigError(f"grid: {name} needs (param, state, action) dimensions {counts}, got {have}",
                          rd.line("grid"), "grid")
    kw = {}
    if name == "hit":
        kw["x_des"] = rd.get(sec, "x_des", _floats, (0.0, 0.0))
        rd.check(sec, "x_des", len(kw["x_des"]) == 2, "needs two values")
    else:
        for key in ("gamma", "dt"):
            val = rd.get(sec, key, float)
            if val is not None:
                kw[key] = val
        for key in ("substeps", "horizon"):
            val = rd.get(sec, key, int)
            if val is not None:
                rd.check(sec, key, val >= 1, "must be >= 1")
                kw[key] = val
        if "gamma" in kw:
            rd.check(sec, "gamma", 0.0 <= kw["gamma"] < 1.0, "must lie in [0, 1)")
        if "dt" in kw:
            rd.check(sec, "dt", kw["dt"] > 0, "must be positive")
    if name == "push":
        kw["rho"] = rd.get(sec, "rho", float, 1.0)
        half = rd.get(sec, "shape_half_extents", _floats, (0.05, 0.03))
        rd.check(sec, "shape_half_extents", len(half) == 2 and min(half) > 0, "needs two positive values")
        kw["shape"] = RadialShape.rounded_rectangle(*half)
    if name == "reorientation":
        for key in ("theta_dot0", "beta"):
            val = rd.get(sec, key, float)
            if val is not None:
                kw[key] = val
    box = rd.get(sec, "start_box", _floats)
    if box is not None:
        rd.check(sec, "start_box", name != "reorientation", "not supported for reorientation")
        rd.check(sec, "start_box", len(box) == 2 * grids.n_state, f"needs {2 * grids.n_state} values")
        kw["start_box"] = [box[: grids.n_state], box[grids.n_state :]]
    try:
        return cls(grids, **kw)
    except ValueError as exc:
        raise ConfigError(f"environment: {exc}", rd.line(sec), sec) from None


def _cross(rd: _Reader, sec: str, base: CrossConfig) -> CrossConfig:
    if not rd.parser.has_section(sec):
        return base
    vals = dict(
        eps=rd.get(sec, "eps", float, base.eps),
        r_max=rd.get(sec, "r_max", int, base.r_max),
        max_sweeps=rd.get(sec, "max_sweeps", int, base.max_sweeps),
        kick_rank=rd.get(sec, "kick_rank", int, base.kick_rank),
        validation_samples=rd.get(sec, "validation_samples", int, base.validation_samples),
        seed=rd.get(sec, "seed", int, base.seed),
    )
    rd.check(sec, "eps", vals["eps"] > 0, "must be positive")
    rd.check(sec, "r_max", vals["r_max"] >= 1, "must be >= 1")
    rd.check(sec, "max_sweeps", vals["max_sweeps"] >= 1, "must be >= 1")
    rd.check(sec, "kick_rank", vals["kick_rank"] >= 0, "must be >= 0")
    rd.check(sec, "validation_samples", vals["validation_samples"] >= 1, "must be >= 1")
    try:
        return CrossConfig(**vals)
    except ValueError as exc:
        raise rd.error(sec, None, str(exc)) from None


def _budget(rd: _Reader, sec: str, prefix: str, base: SampleBudget) -> SampleBudget:
    vals = dict(
        n_samples=rd.get(sec, prefix + "samples", int, base.n_samples),
        polish=rd.get(sec, prefix + "polish", int, base.polish),
        priority=rd.get(sec, prefix + "priority", float, base.priority),
        refine=rd.get(sec, prefix + "refine", _bool, base.refine),
    )
    try:
        return SampleBudget(**vals)
    except ValueError as exc:
        raise rd.error(sec, None, str(exc)) from None


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ValueError("expected a boolean")


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse configuration text; raises :class:`ConfigError` with line numbers."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str  # grid labels keep their case
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"malformed configuration: {exc.message.splitlines()[0]}", line) from None
    for sec in parser.sections():
        if sec == "grid":
            continue
        items = parser.items(sec)
        parser.remove_section(sec)
        parser.add_section(sec)
        for key, val in items:
            if parser.has_option(sec, key.lower()):
                raise ConfigError(f"{sec}.{key.lower()}: duplicate entry", _line_index(text).get((sec, key.lower())))
            parser.set(sec, key.lower(), val)
    rd = _Reader(parser, _line_index(text))
    for sec in parser.sections():
        rd.check(sec, None, sec in ("environment", "grid", "cross", "value_cross", "ttpi", "policy", "eval"),
                 "unknown section")
        for key in parser.options(sec):
            rd.check(sec, key, sec == "grid" or key in KNOWN_KEYS[sec], "unknown entry")
    if not parser.has_section("environment"):
        raise ConfigError("missing [environment] section", None, "environment")
    grids = _grids(rd)
    env = _environment(rd, grids)

    cross = _cross(rd, "cross", CrossConfig())
    value_cross = _cross(rd, "value_cross", cross) if parser.has_section("value_cross") else None
    sec = "ttpi"
    inner = _budget(rd, sec, "inner_", SampleBudget(n_samples=50, polish=0))
    try:
        ttpi = TtpiConfig(
            gamma=env.gamma,
            max_iterations=rd.get(sec, "max_iterations", int, 30),
            value_tolerance=rd.get(sec, "value_tolerance", float, 1e-3),
            cross=cross,
            value_cross=value_cross,
            inner_budget=inner,
            backup_candidates=rd.get(sec, "backup_candidates", int, 8),
            warm_start=rd.get(sec, "warm_start", _bool, True),
            validation_samples=rd.get(sec, "validation_samples", int, 512),
            seed=rd.get(sec, "seed", int, 0),
        )
    except ValueError as exc:
        raise rd.error(sec, None, str(exc)) from None
    policy = _budget(rd, "policy", "", SampleBudget())
    episodes = rd.get("eval", "episodes", int, 50)
    rd.check("eval", "episodes", episodes >= 1, "must be >= 1")
    seeds = rd.get("eval", "seeds", _ints, (0, 1, 2))
    rd.check("eval", "seeds", len(seeds) >= 1, "needs at least one seed")
    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    return ExperimentConfig(env, ttpi, policy, episodes, seeds, source, raw)


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    """Read and parse a configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {os.fspath(path)!r}: {exc.strerror}") from None
    return parse_config(text, os.fspath(path))


def shipped_config(name: str) -> str:
    """Path of a configuration file shipped with the package (``hit``, ``push``, ``reorientation``)."""
    from importlib import resources

    return str(resources.files("ttdc") / "configs" / f"{name}.cfg")
