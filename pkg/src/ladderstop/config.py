"""Flat ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored.  Lists are comma separated.
Every key must appear in :data:`SCHEMA`; anything else is an error that
names the file and line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .distributions import Bernoulli, FinitePMF, Gaussian, TwoSidedExp, degenerate
from .models import ChainModel, ProblemError, StoppingProblem
from .rewards import (
    ConstantReward,
    ExponentialReward,
    LogisticReward,
    OddsReward,
    PowerReward,
    PutReward,
    TableReward,
)

# key -> (type, help)
SCHEMA: dict[str, tuple[str, str]] = {
    "model.kind": ("str", "random-walk | ar1 | shepp-shiryaev | odds"),
    "model.lambda": ("float", "AR(1) coefficient in (0, 1)"),
    "model.probs": ("list", "odds chain success probabilities"),
    "increment.family": ("str", "bernoulli | pmf | gaussian | two-sided-exp | degenerate"),
    "increment.p": ("float", "bernoulli up-probability"),
    "increment.values": ("list", "pmf support points"),
    "increment.probs": ("list", "pmf probabilities (fractions like 1/3 allowed)"),
    "increment.mean": ("float", "gaussian mean"),
    "increment.sd": ("float", "gaussian standard deviation"),
    "increment.mu": ("float", "rate of the Exp(mu) upward part"),
    "increment.minus_rate": ("float", "rate of an exponential downward part"),
    "increment.minus_point": ("float", "size of a deterministic downward part"),
    "increment.value": ("float", "degenerate increment value"),
    "reward.kind": ("str", "power | put | logistic | exponential | constant | odds-product | table"),
    "reward.nu": ("float", "power exponent"),
    "reward.K": ("float", "put strike or logistic scale"),
    "reward.eta": ("float", "logistic steepness"),
    "reward.c": ("float", "constant reward level"),
    "reward.grid": ("list", "table reward nodes"),
    "reward.values": ("list", "table reward values"),
    "rho": ("float", "discount factor in (0, 1]"),
    "direction": ("str", "ascending | descending"),
    "boundary_b": ("float", "positivity boundary (defaults to the reward's)"),
    "engine": ("str", "auto | bank | mc | ar1-exp | exp-overshoot | odds | ss-exact"),
    "seed": ("int", "master seed (required)"),
    "reps": ("int", "Monte Carlo replications"),
    "tol": ("float", "bisection tolerance"),
    "horizon": ("int", "ladder truncation horizon (default: automatic)"),
    "workers": ("int", "threads for simulation"),
    "bracket": ("list", "initial threshold bracket lo, hi"),
    "grid.lo": ("float", "sweep grid start"),
    "grid.hi": ("float", "sweep grid end"),
    "grid.points": ("int", "number of sweep / (M1) grid points"),
    "grid.span": ("float", "(M1) grid length above alpha*"),
    "oracle.h": ("float", "value-iteration grid spacing"),
    "oracle.lo": ("float", "value-iteration grid start"),
    "oracle.hi": ("float", "value-iteration grid end"),
    "oracle.boundary": ("str", "absorb | reflect"),
    "oracle.tol": ("float", "value-iteration sup-norm tolerance"),
    "verify.representation": ("bool", "run the representation self-test"),
    "verify.representation_reps": ("int", "replications for the representation test"),
    "verify.ys": ("list", "test points for the representation test"),
    "verify.max_deviation": ("float", "pass bound on standardized deviations"),
    "example.nu": ("float", "Novikov-Shiryaev exponent"),
    "example.K": ("float", "put strike / logistic scale"),
    "example.eta": ("float", "logistic steepness"),
    "example.lambda": ("float", "AR(1) coefficient"),
    "example.mu": ("float", "AR(1) upward jump rate"),
    "example.B": ("float", "Shepp-Shiryaev jump bound"),
    "example.mode": ("str", "skip-free | bounded"),
    "example.probs": ("list", "odds probabilities"),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)
    source: str = "<config>"

    def _where(self, key: str) -> str:
        line = self.lines.get(key)
        return f"{self.source}:{line}: " if line else f"{key}: "

    def has(self, key: str) -> bool:
        return key in self.values

    def get(self, key: str, default=None):
        if key not in self.values:
            return default
        kind = SCHEMA[key][0]
        raw = self.values[key]
        try:
            if kind == "float":
                return float(raw)
            if kind == "int":
                return int(raw)
            if kind == "bool":
                low = raw.strip().lower()
                if low not in ("true", "false", "yes", "no", "1", "0"):
                    raise ValueError(raw)
                return low in ("true", "yes", "1")
            if kind == "list":
                return [item.strip() for item in raw.split(",") if item.strip()]
            return raw.strip()
        except ValueError:
            raise ConfigError(f"{self._where(key)}{key} = {raw!r} is not a valid {kind}") from None

    def floats(self, key: str) -> Optional[list]:
        items = self.get(key)
        if items is None:
            return None
        try:
            return [float(x) for x in items]
        except ValueError:
            raise ConfigError(f"{self._where(key)}{key} must be a list of numbers") from None

    def require(self, key: str):
        if key not in self.values:
            raise ConfigError(f"missing required key {key!r}")
        return self.get(key)

    def set(self, key: str, value: str, line: Optional[int] = None) -> None:
        if key not in SCHEMA:
            where = f"{self.source}:{line}: " if line else ""
            raise ConfigError(f"{where}unknown key {key!r}")
        self.values[key] = value
        if line is not None:
            self.lines[key] = line
        else:
            self.lines.pop(key, None)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cfg = RunConfig(source=source)
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in cfg.values:
            raise ConfigError(f"{source}:{n}: duplicate key {key!r}")
        cfg.set(key, value, n)
    return cfg


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), path)


def apply_override(cfg: RunConfig, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} must look like key=value")
    key, value = (part.strip() for part in assignment.split("=", 1))
    cfg.set(key, value)


def build_increment(cfg: RunConfig):
    fam = cfg.require("increment.family")
    try:
        if fam == "bernoulli":
            return Bernoulli(cfg.require("increment.p"))
        if fam == "pmf":
            values = cfg.require("increment.values")
            probs = cfg.require("increment.probs")
            return FinitePMF(tuple(values), tuple(probs))
        if fam == "gaussian":
            return Gaussian(cfg.get("increment.mean", 0.0), cfg.require("increment.sd"))
        if fam == "two-sided-exp":
            return TwoSidedExp(cfg.require("increment.mu"), cfg.get("increment.minus_rate"),
                               cfg.get("increment.minus_point"))
        if fam == "degenerate":
            return degenerate(cfg.require("increment.value"))
    except (ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{cfg._where('increment.family')}invalid increment: {exc}") from None
    raise ConfigError(f"{cfg._where('increment.family')}unknown increment family {fam!r}")


def build_reward(cfg: RunConfig, probs: Optional[tuple] = None):
    kind = cfg.require("reward.kind")
    try:
        if kind == "power":
            return PowerReward(cfg.get("reward.nu", 1.0))
        if kind == "put":
            return PutReward(cfg.get("reward.K", 1.0))
        if kind == "logistic":
            return LogisticReward(cfg.get("reward.K", 1.0), cfg.get("reward.eta", 1.0))
        if kind == "exponential":
            return ExponentialReward()
        if kind == "constant":
            return ConstantReward(cfg.get("reward.c", 1.0))
        if kind == "odds-product":
            if probs is None:
                raise ConfigError("odds-product reward needs model.kind = odds")
            return OddsReward(probs)
        if kind == "table":
            return TableReward(tuple(cfg.floats("reward.grid") or ()), tuple(cfg.floats("reward.values") or ()))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{cfg._where('reward.kind')}invalid reward: {exc}") from None
    raise ConfigError(f"{cfg._where('reward.kind')}unknown reward kind {kind!r}")


def build_problem(cfg: RunConfig) -> StoppingProblem:
    kind = cfg.require("model.kind")
    try:
        probs = None
        if kind == "odds":
            probs = tuple(cfg.floats("model.probs") or ())
            model = ChainModel(kind, probs=probs)
        else:
            model = ChainModel(kind, build_increment(cfg), lam=cfg.get("model.lambda"))
        reward = build_reward(cfg, probs)
        return StoppingProblem(model, reward, cfg.require("rho"), cfg.get("direction", "ascending"),
                               cfg.get("boundary_b"))
    except ConfigError:
        raise
    except ProblemError as exc:
        raise ConfigError(str(exc)) from None


def check_common(cfg: RunConfig) -> None:
    if not cfg.has("seed"):
        raise ConfigError("seed is required (set it in the file or pass --seed)")
    for key in ("tol", "oracle.h", "oracle.tol"):
        v = cfg.get(key)
        if v is not None and not (v > 0 and math.isfinite(v)):
            raise ConfigError(f"{cfg._where(key)}{key} must be positive")
    reps = cfg.get("reps")
    if reps is not None and reps < 2:
        raise ConfigError(f"{cfg._where('reps')}reps must be at least 2")
