"""Reward functions g >= 0.

Every reward is a vectorised callable with a few attributes the solvers
rely on: ``sup`` (``math.inf`` when unbounded), ``support`` describing where
g is strictly positive, and an optional closed form for the exponential
overshoot integral  ∫_0^∞ g(y + x) mu e^{-mu x} dx.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import expit, gamma, gammaincc

from .distributions import DivergenceError

# ("above", b): g > 0 exactly on (b, inf); ("below", b): on (-inf, b)
Support = tuple[str, float]


class Reward:
    name: str = ""
    sup: float = math.inf

    @property
    def support(self) -> Support:
        return ("above", -math.inf)

    def __call__(self, y):
        raise NotImplementedError

    def exp_overshoot_closed(self, y: float, mu: float) -> Optional[float]:
        return None

    def describe(self) -> str:
        return self.name


@dataclass(frozen=True)
class PowerReward(Reward):
    """g(y) = (y⁺)^nu."""

    nu: float = 1.0
    name = "power"
    sup = math.inf

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")

    @property
    def support(self):
        return ("above", 0.0)

    def __call__(self, y):
        return np.maximum(y, 0.0) ** self.nu

    def exp_overshoot_closed(self, y, mu):
        if self.nu == 1.0:
            return max(y, 0.0) + 1.0 / mu if y >= 0 else math.exp(mu * y) / mu
        a, x = self.nu + 1.0, mu * max(y, 0.0)
        if x > 600:
            return None
        return math.exp(mu * y) * mu ** (-self.nu) * gamma(a) * gammaincc(a, x)

    def describe(self):
        return f"power(nu={self.nu:g})"


@dataclass(frozen=True)
class PutReward(Reward):
    """g(y) = (K - e^y)⁺."""

    K: float = 1.0
    name = "put"

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError("K must be positive")

    @property
    def sup(self):
        return self.K

    @property
    def support(self):
        return ("below", math.log(self.K))

    def __call__(self, y):
        return np.maximum(self.K - np.exp(y), 0.0)

    def exp_overshoot_closed(self, y, mu):
        if y >= math.log(self.K):
            return 0.0
        L = math.log(self.K) - y
        if mu == 1.0:
            tail = math.exp(y) * L
        else:
            tail = math.exp(y) * mu * math.expm1((1.0 - mu) * L) / (1.0 - mu)
        return self.K * -math.expm1(-mu * L) - tail

    def describe(self):
        return f"put(K={self.K:g})"


@dataclass(frozen=True)
class LogisticReward(Reward):
    """g(y) = 1 / (K e^{-eta y} + 1)."""

    K: float = 1.0
    eta: float = 1.0
    name = "logistic"
    sup = 1.0

    def __post_init__(self):
        if not (self.K > 0 and self.eta > 0):
            raise ValueError("K and eta must be positive")

    def __call__(self, y):
        out = expit(self.eta * np.asarray(y, dtype=float) - math.log(self.K))
        return out if np.ndim(out) else float(out)

    def exp_overshoot_closed(self, y, mu):
        if mu != self.eta:
            return None
        a = self.K * math.exp(-mu * y)
        return math.log1p(a) / a if a > 1e-12 else 1.0 - a / 2.0

    def describe(self):
        return f"logistic(K={self.K:g}, eta={self.eta:g})"


@dataclass(frozen=True)
class ExponentialReward(Reward):
    """g(y) = e^y."""

    name = "exponential"
    sup = math.inf

    def __call__(self, y):
        with np.errstate(over="ignore"):
            return np.exp(y)

    def exp_overshoot_closed(self, y, mu):
        if mu <= 1.0:
            raise DivergenceError("overshoot integral of e^y diverges for mu <= 1")
        return math.exp(y) * mu / (mu - 1.0)


@dataclass(frozen=True)
class ConstantReward(Reward):
    c: float = 1.0
    name = "constant"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("constant reward must be positive")

    @property
    def sup(self):
        return self.c

    def __call__(self, y):
        return np.full(np.shape(y), self.c, dtype=float) if np.ndim(y) else self.c

    def exp_overshoot_closed(self, y, mu):
        return self.c

    def describe(self):
        return f"constant(c={self.c:g})"


@dataclass(frozen=True)
class OddsReward(Reward):
    """Probability that no further success happens after index k.

    g(k) = prod_{l=k+1}^n q_l for k > 0 and 0 for k <= 0.
    """

    probs: tuple
    name = "odds-product"
    sup = 1.0
    _tail: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        q = [1.0 - float(p) for p in self.probs]
        tail = [1.0] * (len(q) + 1)
        for k in range(len(q) - 1, -1, -1):
            tail[k] = tail[k + 1] * q[k]
        # tail[k] = prod_{l=k+1}^n q_l with 1-based l
        object.__setattr__(self, "_tail", tuple(tail))

    @property
    def support(self):
        return ("above", 0.0)

    def __call__(self, k):
        k_arr = np.asarray(k)
        n = len(self.probs)
        idx = np.clip(np.rint(k_arr).astype(int), 0, n)
        out = np.asarray(self._tail)[idx]
        out = np.where(k_arr > 0, out, 0.0)
        return out if np.ndim(k) else float(out)


@dataclass(frozen=True)
class TableReward(Reward):
    """Tabulated reward: linear between nodes, clamped outside the grid."""

    grid: tuple
    values: tuple
    name = "table"

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or len(g) < 2:
            raise ValueError("grid and values must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(g) <= 0):
            raise ValueError("reward grid must be strictly increasing")
        if np.any(v < 0):
            raise ValueError("reward values must be non-negative")
        object.__setattr__(self, "grid", tuple(g))
        object.__setattr__(self, "values", tuple(v))

    @property
    def sup(self):
        return max(self.values)

    @property
    def support(self):
        g, v = np.asarray(self.grid), np.asarray(self.values)
        pos = v > 0
        if not pos.any():
            raise ValueError("tabulated reward is identically zero")
        if pos.all():
            return ("above", -math.inf)
        first, last = np.argmax(pos), len(pos) - 1 - np.argmax(pos[::-1])
        if pos[first:].all():
            return ("above", float(g[first - 1]))
        if pos[: last + 1].all():
            return ("below", float(g[last + 1]))
        raise ValueError("tabulated reward must be positive on a half-line")

    def __call__(self, y):
        return np.interp(y, self.grid, self.values)


@dataclass(frozen=True)
class MirroredReward(Reward):
    """g̃(z) = g(-z)."""

    base: Reward

    @property
    def name(self):
        return f"mirrored-{self.base.name}"

    @property
    def sup(self):
        return self.base.sup

    @property
    def support(self):
        side, b = self.base.support
        return ("below" if side == "above" else "above", -b)

    def __call__(self, z):
        return self.base(-np.asarray(z, dtype=float)) if np.ndim(z) else float(self.base(-z))

    def describe(self):
        return f"mirrored({self.base.describe()})"


@dataclass(frozen=True)
class ScaledReward(Reward):
    """c · g."""

    base: Reward
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("scale factor must be positive")

    @property
    def name(self):
        return f"scaled-{self.base.name}"

    @property
    def sup(self):
        return self.c * self.base.sup

    @property
    def support(self):
        return self.base.support

    def __call__(self, y):
        return self.c * self.base(y)

    def exp_overshoot_closed(self, y, mu):
        inner = self.base.exp_overshoot_closed(y, mu)
        return None if inner is None else self.c * inner

    def describe(self):
        return f"{self.c:g}*{self.base.describe()}"


def mirror(reward: Reward) -> Reward:
    if isinstance(reward, MirroredReward):
        return reward.base
    return MirroredReward(reward)


def exp_overshoot_integral(reward: Reward, y: float, mu: float, rtol: float = 1e-10) -> float:
    """∫_0^∞ g(y + x) mu e^{-mu x} dx, in closed form where one is known."""
    closed = reward.exp_overshoot_closed(y, mu)
    if closed is not None:
        return float(closed)
    val, err = integrate.quad(lambda x: float(reward(y + x)) * mu * math.exp(-mu * x),
                              0.0, math.inf, epsrel=rtol, epsabs=0.0, limit=400)
    if not math.isfinite(val):
        raise DivergenceError("overshoot integral diverges")
    return val
