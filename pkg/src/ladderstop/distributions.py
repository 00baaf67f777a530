"""Increment laws for the driving innovations X_1, X_2, ...

Four families are supported:

* ``Bernoulli``: +1 with probability p, -1 with probability q = 1 - p
* ``FinitePMF``: an arbitrary finite-support law
* ``Gaussian``
* ``TwoSidedExp``: X = X⁺ - X⁻ with X⁺ ~ Exp(mu) and an independent
  non-negative X⁻ that is absent, exponential or a point mass

All laws are immutable.  Each one knows how to sample itself, evaluate its
log moment generating function, produce its exponentially tilted version and
its mirror image, and expose either exact atoms or a quadrature rule for
one-step expectations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.laguerre import laggauss
from scipy.special import logsumexp
from scipy.stats import norm

_PROB_TOL = 1e-12


class DivergenceError(ArithmeticError):
    """A transform or expectation needed by a computation is infinite."""


class IncrementDistribution:
    family: str = ""

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def log_mgf(self, u: float) -> float:
        """log E exp(u X); ``math.inf`` when the expectation diverges."""
        raise NotImplementedError

    def log_laplace_negative_part(self, u: float) -> float:
        """log E exp(-u X⁻) for u >= 0."""
        raise NotImplementedError

    def atoms(self) -> Optional[tuple[np.ndarray, np.ndarray]]:
        """Support points and probabilities for discrete laws, else None."""
        return None

    def quadrature(self, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
        atoms = self.atoms()
        if atoms is None:
            raise NotImplementedError
        return atoms

    def mean(self) -> float:
        raise NotImplementedError

    def scale(self) -> float:
        """A typical jump size, used to size grids and brackets."""
        raise NotImplementedError

    def prob_positive(self) -> float:
        raise NotImplementedError

    def negate(self) -> "IncrementDistribution":
        raise NotImplementedError

    def tilt(self) -> tuple["IncrementDistribution", float]:
        """Law of X under dQ/dP = e^X / mu, together with mu = E e^X."""
        raise NotImplementedError

    def max_negative_part(self) -> float:
        """Essential supremum of X⁻ = max(-X, 0)."""
        raise NotImplementedError

    def is_integer_valued(self) -> bool:
        atoms = self.atoms()
        if atoms is None:
            return False
        return bool(np.all(np.equal(np.mod(atoms[0], 1.0), 0.0)))

    def is_skip_free_down(self) -> bool:
        """Integer valued with every negative atom equal to -1."""
        if not self.is_integer_valued():
            return False
        values, probs = self.atoms()
        neg = values[(values < 0) & (probs > 0)]
        return bool(np.all(neg == -1.0))

    def has_moment(self, order: float) -> bool:
        # every supported family has exponential tails
        return True


def _check_prob(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class Bernoulli(IncrementDistribution):
    """Lattice step: +1 with probability ``p``, -1 with probability ``q``."""

    p: float
    q: Optional[float] = None

    family = "bernoulli"

    def __post_init__(self):
        p = float(self.p)
        q = 1.0 - p if self.q is None else float(self.q)
        _check_prob("p", p)
        _check_prob("q", q)
        if abs(p + q - 1.0) > _PROB_TOL:
            raise ValueError(f"p + q must equal 1, got {p + q}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    def sample(self, rng, size=None):
        u = rng.random(size)
        return np.where(u < self.p, 1.0, -1.0) if size is not None else (1.0 if u < self.p else -1.0)

    def atoms(self):
        return np.array([1.0, -1.0]), np.array([self.p, self.q])

    def log_mgf(self, u):
        terms = [math.log(w) + s * u for s, w in ((1.0, self.p), (-1.0, self.q)) if w > 0]
        return float(logsumexp(terms))

    def log_laplace_negative_part(self, u):
        return float(logsumexp([math.log(w) + c for w, c in ((self.p, 0.0), (self.q, -u)) if w > 0]))

    def mean(self):
        return self.p - self.q

    def scale(self):
        return 1.0

    def prob_positive(self):
        return self.p

    def negate(self):
        return Bernoulli(self.q, self.p)

    def tilt(self):
        up, down = self.p * math.e, self.q / math.e
        mu = up + down
        return Bernoulli(up / mu, down / mu), mu

    def max_negative_part(self):
        return 1.0 if self.q > 0 else 0.0


@dataclass(frozen=True)
class FinitePMF(IncrementDistribution):
    values: tuple
    probs: tuple

    family = "pmf"

    def __post_init__(self):
        values = tuple(float(Fraction(v)) if isinstance(v, str) else float(v) for v in self.values)
        probs = tuple(float(Fraction(w)) if isinstance(w, str) else float(w) for w in self.probs)
        if len(values) != len(probs) or not values:
            raise ValueError("values and probs must be non-empty and of equal length")
        for w in probs:
            _check_prob("probability", w)
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError(f"probabilities must sum to 1, got {sum(probs)}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    def sample(self, rng, size=None):
        vals = np.asarray(self.values)
        if len(vals) == 1:
            return np.full(size, vals[0]) if size is not None else float(vals[0])
        idx = rng.choice(len(vals), size=size, p=np.asarray(self.probs))
        return vals[idx] if size is not None else float(vals[idx])

    def atoms(self):
        return np.asarray(self.values), np.asarray(self.probs)

    def log_mgf(self, u):
        v, w = self.atoms()
        keep = w > 0
        return float(logsumexp(u * v[keep] + np.log(w[keep])))

    def log_laplace_negative_part(self, u):
        v, w = self.atoms()
        keep = w > 0
        return float(logsumexp(-u * np.maximum(-v[keep], 0.0) + np.log(w[keep])))

    def mean(self):
        v, w = self.atoms()
        return float(v @ w)

    def scale(self):
        v, w = self.atoms()
        return max(float(np.max(np.abs(v[w > 0]))), 1e-12)

    def prob_positive(self):
        v, w = self.atoms()
        return float(w[v > 0].sum())

    def negate(self):
        return FinitePMF(tuple(-v for v in self.values), self.probs)

    def tilt(self):
        v, w = self.atoms()
        logw = np.where(w > 0, np.log(np.where(w > 0, w, 1.0)) + v, -np.inf)
        log_mu = logsumexp(logw)
        return FinitePMF(self.values, tuple(np.exp(logw - log_mu))), float(np.exp(log_mu))

    def max_negative_part(self):
        v, w = self.atoms()
        return float(max(0.0, -v[w > 0].min()))


def degenerate(x: float) -> FinitePMF:
    return FinitePMF((x,), (1.0,))


@dataclass(frozen=True)
class Gaussian(IncrementDistribution):
    loc: float
    sd: float

    family = "gaussian"

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError(f"sd must be positive, got {self.sd}")

    def sample(self, rng, size=None):
        return rng.normal(self.loc, self.sd, size)

    def quadrature(self, n=64):
        x, w = hermegauss(n)
        return self.loc + self.sd * x, w / math.sqrt(2.0 * math.pi)

    def log_mgf(self, u):
        return self.loc * u + 0.5 * (self.sd * u) ** 2

    def log_laplace_negative_part(self, u):
        m, s = self.loc, self.sd
        # E e^{-u max(-X,0)} = P(X >= 0) + E[e^{uX}; X < 0]
        pos = norm.cdf(m / s)
        neg = math.exp(m * u + 0.5 * (s * u) ** 2) * norm.cdf((-m - s * s * u) / s)
        return math.log(pos + neg)

    def mean(self):
        return self.loc

    def scale(self):
        return self.sd

    def prob_positive(self):
        return float(norm.sf(0.0, self.loc, self.sd))

    def negate(self):
        return Gaussian(-self.loc, self.sd)

    def tilt(self):
        return Gaussian(self.loc + self.sd ** 2, self.sd), math.exp(self.loc + 0.5 * self.sd ** 2)

    def max_negative_part(self):
        return math.inf


@dataclass(frozen=True)
class TwoSidedExp(IncrementDistribution):
    """X = X⁺ - X⁻, X⁺ ~ Exp(mu) independent of X⁻.

    X⁻ is identically zero when neither ``minus_rate`` nor ``minus_point``
    is given, Exp(minus_rate) or the point mass at ``minus_point``.
    """

    mu: float
    minus_rate: Optional[float] = None
    minus_point: Optional[float] = None

    family = "two-sided-exp"

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.minus_rate is not None and self.minus_point is not None:
            raise ValueError("give at most one of minus_rate and minus_point")
        if self.minus_rate is not None and not self.minus_rate > 0:
            raise ValueError("minus_rate must be positive")
        if self.minus_point is not None and self.minus_point < 0:
            raise ValueError("minus_point must be non-negative")

    @property
    def has_minus(self) -> bool:
        return self.minus_rate is not None or bool(self.minus_point)

    def sample_minus(self, rng, size=None):
        if self.minus_rate is not None:
            return rng.exponential(1.0 / self.minus_rate, size)
        d = self.minus_point or 0.0
        return np.full(size, d) if size is not None else d

    def sample(self, rng, size=None):
        up = rng.exponential(1.0 / self.mu, size)
        if not self.has_minus:
            return up
        return up - self.sample_minus(rng, size)

    def quadrature(self, n=64):
        if self.minus_rate is None:
            t, w = laggauss(n)
            return t / self.mu - (self.minus_point or 0.0), w
        # asymmetric Laplace: positive branch Exp(mu), negative branch -Exp(a)
        a = self.minus_rate
        t, w = laggauss(n // 2)
        p_pos = a / (self.mu + a)
        nodes = np.concatenate([t / self.mu, -t / a])
        weights = np.concatenate([w * p_pos, w * (1.0 - p_pos)])
        return nodes, weights

    def log_mgf_positive_part(self, u):
        return math.log(self.mu / (self.mu - u)) if u < self.mu else math.inf

    def log_laplace_negative_part(self, u):
        if self.minus_rate is not None:
            a = self.minus_rate
            return math.log(a / (a + u)) if u > -a else math.inf
        return -u * (self.minus_point or 0.0)

    def log_mgf(self, u):
        return self.log_mgf_positive_part(u) + self.log_laplace_negative_part(u)

    def mean(self):
        minus = 1.0 / self.minus_rate if self.minus_rate is not None else (self.minus_point or 0.0)
        return 1.0 / self.mu - minus

    def scale(self):
        minus = 1.0 / self.minus_rate if self.minus_rate is not None else (self.minus_point or 0.0)
        return max(1.0 / self.mu, minus)

    def prob_positive(self):
        if self.minus_rate is not None:
            return self.minus_rate / (self.mu + self.minus_rate)
        return math.exp(-self.mu * (self.minus_point or 0.0))

    def negate(self):
        if self.minus_rate is None:
            raise NotImplementedError("negation of a two-sided exponential law needs an exponential X⁻")
        return TwoSidedExp(self.minus_rate, minus_rate=self.mu)

    def tilt(self):
        if self.mu <= 1.0:
            raise DivergenceError(f"E exp(X) is infinite for X⁺ ~ Exp({self.mu})")
        mu_x = math.exp(self.log_mgf(1.0))
        if self.minus_rate is not None:
            return TwoSidedExp(self.mu - 1.0, minus_rate=self.minus_rate + 1.0), mu_x
        return TwoSidedExp(self.mu - 1.0, minus_point=self.minus_point), mu_x

    def max_negative_part(self):
        if self.minus_rate is not None:
            return math.inf
        return self.minus_point or 0.0
