"""Command-line entry point: ``ttdc train | contract | eval | bench-retrieval``.

Exit codes: 0 success, 2 configuration or usage error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import io
from .bench import bench_retrieval
from .config import load_config, shipped_config
from .contraction import InvalidWindowError, WindowSpec, contract, uniform_window
from .errors import (CapacityError, ConfigError, CrossEvaluationError, DegenerateDistributionError, DomainError,
                     ShapeError)
from .experiment import evaluate
from .io import ModelFormatError
from .ttpi import PolicyIterationError, PolicyModel, policy_iteration

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SHIPPED = ("hit", "push", "reorientation")
log = logging.getLogger("ttdc")


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _config(arg: str):
    """Load a config file; a bare shipped name (``hit``, ``push``, ``reorientation``) selects the packaged one."""
    if not os.path.exists(arg) and arg in SHIPPED:
        arg = shipped_config(arg)
    return load_config(arg)


def _window_dist(model: PolicyModel, center, w):
    pg = model.grids.param_grids
    if center is None:
        center = [0.5 * (g.lower + g.upper) for g in pg]
    if w is None:
        w = 1
    spec = WindowSpec(center, w)
    return spec, uniform_window(model.grids, spec)


def cmd_train(args) -> int:
    cfg = _config(args.config)
    ttpi = cfg.ttpi if args.seed is None else replace(cfg.ttpi, seed=args.seed)
    model = policy_iteration(cfg.environment, ttpi)
    model.metadata["config_source"] = cfg.raw
    model.save(args.out)
    print(f"trained {cfg.environment.name} in {model.train_seconds:.2f} s; "
          f"advantage ranks {list(model.advantage.ranks)}; wrote {args.out}")
    return EXIT_OK


def cmd_contract(args) -> int:
    with open(args.model, "rb") as fh:
        data = fh.read()
    tt, grids, meta = io.loads(data)
    if grids.n_param == 0:
        raise ShapeError(f"{args.model} has no parameter block left to contract")
    model = PolicyModel(grids, tt, meta)
    spec, dist = _window_dist(model, args.center, args.window_w)
    t0 = time.perf_counter()
    out = contract(model, dist)
    elapsed = time.perf_counter() - t0
    provenance = {
        "kind": "contracted",
        "center": list(spec.center),
        "w": spec.w,
        "weights_digest": dist.digest(),
        "source_digest": hashlib.sha256(data).hexdigest()[:16],
        "environment": meta.get("environment", {}),
    }
    io.save(args.out, out, grids.tail(grids.n_param), provenance)
    print(f"contracted w={spec.w} in {elapsed * 1e3:.3f} ms; ranks {list(out.ranks)}; wrote {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args.config)
    model = PolicyModel.load(args.model)
    if model.grids.sizes != cfg.grids.sizes:
        raise ShapeError(f"model grids {model.grids.sizes} do not match configuration grids {cfg.grids.sizes}")
    episodes = args.episodes if args.episodes is not None else cfg.episodes
    seeds = (args.seed,) if args.seed is not None else cfg.seeds
    widths = args.window_w if args.window_w else None
    report = evaluate(cfg.environment, model, widths, episodes, seeds, cfg.policy_budget)
    text = report.summary_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.episodes_out:
        with open(args.episodes_out, "w", encoding="utf-8") as fh:
            fh.write(report.episodes_csv())
    return EXIT_OK


def cmd_bench(args) -> int:
    model = PolicyModel.load(args.model)
    dist = None
    if args.window_w is not None or args.center is not None:
        _, dist = _window_dist(model, args.center, args.window_w)
    res = bench_retrieval(model, dist, repeats=args.repeats, seed=args.seed or 0)
    lines = [
        "path,mean_s,std_s,repeats",
        f"core-level,{res.core_mean:.6g},{res.core_std:.3g},{res.repeats}",
        f"function-level ({res.baseline}),{res.function_mean:.6g},{res.function_std:.3g},{res.repeats}",
        f"ratio,{res.ratio:.4g},,",
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ttdc", description="Parameter-augmented TT policies and domain contraction.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a parameter-augmented policy model")
    t.add_argument("--config", required=True, help="config file, or hit | push | reorientation for a shipped one")
    t.add_argument("--seed", type=int)
    t.add_argument("--out", default="model.ttcm")
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("contract", help="contract the parameter block with a uniform window")
    c.add_argument("model")
    c.add_argument("--center", type=_floats, help="window center, one value per parameter (default: box center)")
    c.add_argument("--window-w", type=int, default=1)
    c.add_argument("--out", default="contracted.ttcm")
    c.set_defaults(func=cmd_contract)

    e = sub.add_parser("eval", help="roll out window-contracted policies against domain adaptation")
    e.add_argument("model")
    e.add_argument("--config", required=True, help="config file, or hit | push | reorientation for a shipped one")
    e.add_argument("--episodes", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--window-w", type=int, nargs="+", help="window widths (default: 1, N/20, N/5, N)")
    e.add_argument("--out", help="summary CSV (default: stdout)")
    e.add_argument("--episodes-out", help="per-episode CSV")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench-retrieval", help="time core-level against function-level retrieval")
    b.add_argument("model")
    b.add_argument("--center", type=_floats)
    b.add_argument("--window-w", type=int)
    b.add_argument("--repeats", type=int, default=20)
    b.add_argument("--seed", type=int)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (PolicyIterationError, CrossEvaluationError, DegenerateDistributionError, CapacityError,
            ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ModelFormatError, InvalidWindowError, ShapeError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
