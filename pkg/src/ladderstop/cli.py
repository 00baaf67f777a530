"""Command-line front end: ``ladderstop {solve,sweep,verify,example}``.

Exit codes: 0 certified / all checks pass, 2 computed but not certified
(or undetermined), 1 error.  Reports go to stdout (or ``--out``) as
``key: value`` lines; timing goes to stderr so stdout is reproducible.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from contextlib import contextmanager
from typing import Optional

import numpy as np

from . import examples as ex
from .config import ConfigError, RunConfig, apply_override, build_increment, build_problem, check_common, load_config
from .distributions import DivergenceError
from .models import ASCENDING, DESCENDING, ODDS, RANDOM_WALK, ProblemError, StoppingProblem
from .ladder import mirror_problem
from .oracle import (
    Grid,
    default_grid,
    extract_boundary,
    representation_check,
    simulate_max_increment,
    value_iteration,
)
from .phi import make_engine
from .rng import RandomStream
from .threshold import UNDETERMINED, ThresholdError, f_at, solve

EXIT_OK, EXIT_ERROR, EXIT_UNCERTIFIED = 0, 1, 2


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


@contextmanager
def _output(path: Optional[str]):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh
    else:
        yield sys.stdout


def _solve_kwargs(cfg: RunConfig) -> dict:
    kw = dict(engine=cfg.get("engine", "auto"), reps=cfg.get("reps", 100_000),
              stream=RandomStream(cfg.get("seed")), tol=cfg.get("tol", 1e-8),
              horizon=cfg.get("horizon"), workers=cfg.get("workers", 1))
    bracket = cfg.floats("bracket")
    if bracket is not None:
        if len(bracket) != 2:
            raise ConfigError("bracket needs exactly two numbers")
        kw["bracket"] = tuple(bracket)
    if cfg.has("grid.points"):
        kw["grid_points"] = cfg.get("grid.points")
    if cfg.has("grid.span"):
        kw["grid_span"] = cfg.get("grid.span")
    return kw


def _threshold_exit(res) -> int:
    return EXIT_OK if res.certified else EXIT_UNCERTIFIED


def run_solve(cfg: RunConfig, out) -> int:
    check_common(cfg)
    problem = build_problem(cfg)
    res = solve(problem, **_solve_kwargs(cfg))
    lines = [f"problem: {problem.describe()}"] + res.report_lines()
    out.write("\n".join(lines) + "\n")
    return _threshold_exit(res)


def run_sweep(cfg: RunConfig, out) -> int:
    check_common(cfg)
    problem = build_problem(cfg)
    lo, hi = cfg.require("grid.lo"), cfg.require("grid.hi")
    n = cfg.get("grid.points", 21)
    if n < 2 or not hi > lo:
        raise ConfigError("sweep needs grid.hi > grid.lo and grid.points >= 2")
    descending = problem.direction == DESCENDING
    target = mirror_problem(problem) if descending else problem
    engine = make_engine(target, cfg.get("engine", "auto"), reps=cfg.get("reps", 100_000),
                         stream=RandomStream(cfg.get("seed")), horizon=cfg.get("horizon"),
                         workers=cfg.get("workers", 1))
    ys = np.linspace(lo, hi, n)
    if engine.integer:
        ys = np.unique(np.round(ys))
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["y", "g", "phi", "phi_stderr", "f", "f_stderr"])
    for y in ys:
        pt = engine.evaluate(-float(y) if descending else float(y))
        fv = f_at(pt)
        w.writerow([_fmt(float(y)), _fmt(pt.g), _fmt(pt.phi.value), _fmt(pt.phi.stderr),
                    _fmt(fv.value), _fmt(fv.stderr)])
    return EXIT_OK


def run_verify(cfg: RunConfig, out) -> int:
    check_common(cfg)
    problem = build_problem(cfg)
    if problem.rho >= 1.0 and problem.model.kind != ODDS:
        raise ProblemError("verify needs rho < 1 or the odds chain")
    res = solve(problem, **_solve_kwargs(cfg))
    integer = problem.model.kind == ODDS or res.engine in ("ss-exact",)
    h = cfg.get("oracle.h", 1.0 if integer else 0.01)
    if cfg.has("oracle.lo") or cfg.has("oracle.hi"):
        grid = Grid(cfg.require("oracle.lo"), cfg.require("oracle.hi"), h)
    else:
        grid = default_grid(problem, h, res.alpha_star)
    sol = value_iteration(problem, grid, cfg.get("oracle.boundary", "absorb"), tol=cfg.get("oracle.tol", 1e-10))
    edge, one_sided = extract_boundary(sol, problem.direction)
    delta = abs(res.alpha_star - edge)
    allowed = h + 3.0 * res.alpha_stderr
    lines = [f"problem: {problem.describe()}"] + res.report_lines() + [
        f"oracle_boundary: {_fmt(edge)}",
        f"oracle_one_sided: {'yes' if one_sided else 'no'}",
        f"oracle_h: {_fmt(h)}",
        f"oracle_iterations: {sol.iterations}",
        f"oracle_converged: {'yes' if sol.converged else 'no'}",
        f"delta: {_fmt(delta)}",
        f"delta_allowed: {_fmt(allowed)}",
    ]
    checks = {"oracle_agreement": delta <= allowed, "oracle_one_sided": one_sided,
              "oracle_converged": sol.converged}
    undetermined = res.boundary == UNDETERMINED or 3.0 * res.alpha_stderr > h
    if undetermined:
        lines.append("resolution: undetermined (3 stderr of alpha* exceeds the oracle grid spacing)")
    if (cfg.get("verify.representation", problem.model.kind == RANDOM_WALK)
            and problem.model.kind == RANDOM_WALK and problem.direction == ASCENDING):
        dev = _representation(problem, res, cfg)
        bound = cfg.get("verify.max_deviation", 3.0)
        lines.append(f"representation_max_deviation: {_fmt(dev)}")
        checks["representation"] = dev <= bound
    for k, ok in checks.items():
        lines.append(f"check_{k}: {'pass' if ok else 'fail'}")
    status = "undetermined" if undetermined else ("pass" if all(checks.values()) else "fail")
    lines.append(f"verify: {status}")
    out.write("\n".join(lines) + "\n")
    return EXIT_OK if status == "pass" else EXIT_UNCERTIFIED


def _representation(problem: StoppingProblem, res, cfg: RunConfig) -> float:
    ys = cfg.floats("verify.ys") or [res.alpha_star + d for d in (0.5, 1.5, 3.5)]
    stream = RandomStream(cfg.get("seed"))
    reps = cfg.get("verify.representation_reps", 100_000)
    dist = problem.model.increment
    engine = make_engine(problem, cfg.get("engine", "auto"), reps=cfg.get("reps", 100_000),
                         stream=stream.child(1), horizon=cfg.get("horizon"))
    d_max = float(simulate_max_increment(dist, problem.rho, reps, stream.child(2)).max())
    if dist.is_integer_valued():
        # M_T - y lives on the integers, so tabulate f exactly there
        fx = np.unique(np.concatenate([y + np.arange(0.0, math.ceil(d_max) + 1.0) for y in ys]))
    else:
        fx = np.linspace(min(ys), max(ys) + d_max, 2001)
    fv = [f_at(p) for p in engine.evaluate_many(fx)]
    rr = representation_check(dist, problem.rho, problem.reward, fx, [f.value for f in fv], ys, reps,
                              stream.child(2), [f.stderr for f in fv])
    return rr.max_deviation


def _example_spec(tag: str, cfg: RunConfig) -> ex.ExampleSpec:
    params = {}
    for key in ("nu", "K", "eta", "lambda", "mu", "B"):
        if cfg.has(f"example.{key}"):
            params[key] = cfg.get(f"example.{key}")
    if cfg.has("example.mode"):
        params["mode"] = cfg.get("example.mode")
    if tag == "odds":
        probs = cfg.floats("example.probs") or cfg.floats("model.probs")
        if not probs:
            raise ConfigError("odds example needs example.probs")
        params["probs"] = probs
    dist = build_increment(cfg) if cfg.has("increment.family") else None
    if dist is None and tag not in ("odds", "ar1-exp"):
        raise ConfigError(f"example {tag} needs increment.family and its parameters")
    rho = cfg.get("rho", 1.0 if tag == "odds" else None)
    if rho is None:
        raise ConfigError("missing required key 'rho'")
    return ex.ExampleSpec(tag, rho, dist, params)


def run_example(tag: str, cfg: RunConfig, out) -> int:
    if not cfg.has("seed"):
        cfg.set("seed", "0")
    check_common(cfg)
    spec = _example_spec(tag, cfg)
    problem = ex.build_problem(spec)
    closed = ex.closed_form_threshold(spec)
    res = solve(problem, **_solve_kwargs(cfg))
    lines = [f"example: {tag}", f"problem: {problem.describe()}", f"closed_form_alpha_star: {_fmt(closed)}"]
    lines += res.report_lines()
    out.write("\n".join(lines) + "\n")
    return _threshold_exit(res)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ladderstop", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--reps", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--grid-points", type=int, help="grid density for sweeps and the (M1) check")
    common.add_argument("--out", help="write the report or CSV here instead of stdout")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="find and certify the optimal threshold")
    sub.add_parser("sweep", parents=[common], help="tabulate g, phi and f on a grid")
    sub.add_parser("verify", parents=[common], help="compare the pipeline with the DP oracle")
    p_ex = sub.add_parser("example", parents=[common], help="run a worked example by tag")
    p_ex.add_argument("tag", choices=ex.EXAMPLE_TAGS)
    return parser


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    for assignment in args.set:
        apply_override(cfg, assignment)
    for flag, key in (("seed", "seed"), ("reps", "reps"), ("tol", "tol"), ("grid_points", "grid.points")):
        value = getattr(args, flag)
        if value is not None:
            cfg.set(key, repr(value))
    return cfg


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = _config_from_args(args)
        buf = io.StringIO()
        if args.command == "solve":
            code = run_solve(cfg, buf)
        elif args.command == "sweep":
            code = run_sweep(cfg, buf)
        elif args.command == "verify":
            code = run_verify(cfg, buf)
        else:
            code = run_example(args.tag, cfg, buf)
        with _output(args.out) as fh:
            fh.write(buf.getvalue())
    except (ConfigError, ProblemError, ThresholdError, DivergenceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"wall_time_s: {time.perf_counter() - start:.3f}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
