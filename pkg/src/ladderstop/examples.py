"""Closed and semi-closed thresholds for the six worked examples.

These double as user-facing solvers and as independent oracles for the
generic pipeline in :mod:`ladderstop.threshold`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.special import comb

from .distributions import IncrementDistribution, TwoSidedExp
from .ladder import LadderBank, bernoulli_ascent_transform, ladder_bank_rw
from .models import (
    AR1,
    DESCENDING,
    ODDS,
    SHEPP_SHIRYAEV,
    ChainModel,
    ProblemError,
    StoppingProblem,
    exponential_tilt,
    random_walk,
)
from .phi import MonteCarloEngine, phi_rw_exp_overshoot, solve_b_root, ss_first_passage_exact
from .rewards import ConstantReward, ExponentialReward, LogisticReward, OddsReward, PowerReward, PutReward

__all__ = [
    "ExampleSpec", "american_put_threshold", "ar1_exp_threshold", "build_problem", "descending_bank",
    "exact_ladder_bank", "lambert_w", "logistic_threshold", "ns_threshold", "odds_f", "odds_threshold",
    "odds_win_probability", "shepp_shiryaev_threshold", "ss_first_passage_exact",
]


# -- ladder banks used by the examples ------------------------------------------------

def _unit_steps(dist: IncrementDistribution) -> bool:
    atoms = dist.atoms()
    if atoms is None:
        return False
    v, w = atoms
    return bool(np.all(np.isin(v[w > 0], (-1.0, 1.0))))


def exact_ladder_bank(dist: IncrementDistribution, rho: float, descending: bool = False) -> LadderBank:
    """Exact one-atom ladder law for a ±1 walk: overshoot ±1 with weight E ρ^τ."""
    if not _unit_steps(dist):
        raise ProblemError("an exact ladder bank needs a walk with steps in {-1, +1}")
    v, w = dist.atoms()
    p = float(w[v == 1.0].sum())
    if descending:
        return LadderBank.from_atoms([-1.0], [bernoulli_ascent_transform(1.0 - p, rho)], rho)
    return LadderBank.from_atoms([1.0], [bernoulli_ascent_transform(p, rho)], rho)


def descending_bank(dist: IncrementDistribution, rho: float, reps: int, stream,
                    horizon: Optional[int] = None) -> LadderBank:
    """Simulated (τ₋, S_{τ₋}) draws, with negative overshoots."""
    mirrored = random_walk(dist.negate(), ConstantReward(1.0), rho)
    bank = ladder_bank_rw(mirrored, reps, stream, horizon)
    bank.end = -bank.end
    return bank


def _moments(bank: LadderBank, fn) -> float:
    hit = bank.epoch > 0
    vals = np.zeros(len(bank))
    vals[hit] = bank.weight[hit] * fn(bank.overshoot[hit])
    return float(bank.mass @ vals)


def _bisect_decreasing(fn, lo: float, hi: float, tol: float = 1e-12, max_expand: int = 60) -> float:
    """Root of a decreasing fn, expanding the bracket outward as needed."""
    width = hi - lo
    k = 0
    while fn(lo) <= 0:
        lo -= width * 2.0 ** k
        k += 1
        if k > max_expand:
            raise ProblemError("no root in the expanded bracket (stop everywhere)")
    k = 0
    while fn(hi) > 0:
        hi += width * 2.0 ** k
        k += 1
        if k > max_expand:
            raise ProblemError("no root in the expanded bracket (continue everywhere)")
    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if fn(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- Novikov-Shiryaev ------------------------------------------------------------------

def ns_threshold(dist: IncrementDistribution, rho: float, nu: float, ladder_bank: LadderBank) -> float:
    """Positive root of E ρ^{τ₊} (1 + S_{τ₊}/y)^ν = 1 for g(y) = (y⁺)^ν.

    For integer ν the left side is a polynomial in 1/y whose coefficients
    are C(ν, m) E ρ^{τ₊} S_{τ₊}^m; fractional ν is solved by bisection.
    """
    if not nu > 0:
        raise ValueError("nu must be positive")
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    c = _moments(ladder_bank, lambda s: np.ones_like(s))
    if c >= 1.0:
        raise ProblemError(f"E rho^tau = {c} >= 1: no threshold")
    if float(nu).is_integer():
        n = int(nu)
        coeffs = [comb(n, m, exact=True) * _moments(ladder_bank, lambda s, m=m: s ** m) for m in range(n + 1)]
        coeffs[0] -= 1.0
        roots = np.polynomial.Polynomial(coeffs).roots()
        real = [r.real for r in roots if abs(r.imag) <= 1e-10 * max(1.0, abs(r)) and r.real > 0]
        if not real:
            raise ProblemError("no positive root of the ladder polynomial")
        return float(1.0 / min(real))
    return _bisect_decreasing(lambda y: _moments(ladder_bank, lambda s: (1.0 + s / y) ** nu) - 1.0,
                              1e-6 * dist.scale(), 10.0 * dist.scale())


# -- American put ----------------------------------------------------------------------

def american_put_threshold(dist: IncrementDistribution, rho: float, K: float,
                           descending_bank: LadderBank) -> float:
    """a* = log(K (1 - E ρ^{τ₋}) / (1 - E ρ^{τ₋} e^{S_{τ₋}})) for g(y) = (K - e^y)⁺."""
    if not 0 < rho < 1:
        raise ValueError("the put threshold needs 0 < rho < 1")
    if not K > 0:
        raise ValueError("K must be positive")
    hit = descending_bank.epoch > 0
    if np.any(descending_bank.overshoot[hit] >= 0):
        raise ProblemError("the put threshold needs a descending bank (negative overshoots)")
    c = _moments(descending_bank, lambda s: np.ones_like(s))
    ce = _moments(descending_bank, np.exp)
    num, den = K * (1.0 - c), 1.0 - ce
    if den <= 0 or num <= 0:
        raise ProblemError("put threshold formula has a non-positive argument")
    return math.log(num / den)


# -- logistic reward -------------------------------------------------------------------

def logistic_threshold(dist: IncrementDistribution, rho: float, K: float, eta: float,
                       bank: Optional[LadderBank] = None) -> float:
    """Root of E ρ^{τ₊} (K e^{-ηy} + 1) / (K e^{-η(y + S_{τ₊})} + 1) = 1.

    With Exp(μ) upward jumps, η = μ and no bank the overshoot closed form is used.
    """
    if not (K > 0 and eta > 0):
        raise ValueError("K and eta must be positive")
    reward = LogisticReward(K, eta)
    if bank is None:
        if not (isinstance(dist, TwoSidedExp) and math.isclose(dist.mu, eta)):
            raise ProblemError("without a bank the logistic threshold needs Exp(eta) upward jumps")
        b_root = solve_b_root(dist, rho)

        def ratio(y):
            return phi_rw_exp_overshoot(dist.mu, b_root, rho, reward, y).value / reward(y)
    else:
        def ratio(y):
            return _moments(bank, lambda s: (K * math.exp(-eta * y) + 1.0)
                            / (K * np.exp(-eta * (y + s)) + 1.0))

    return _bisect_decreasing(lambda y: ratio(y) - 1.0, -dist.scale(), dist.scale())


# -- Shepp-Shiryaev --------------------------------------------------------------------

def shepp_shiryaev_threshold(dist: IncrementDistribution, rho: float, B: Optional[float] = None,
                             mode: str = "skip-free", reps: int = 100_000, stream=0,
                             horizon: Optional[int] = None, cap: int = 10_000) -> float:
    """Threshold for g = e^y on the reflected chain under the tilted measure.

    skip-free: a* = min{y ∈ ℕ : E_Q r^{τ_y} ≤ e^{-1}}, exactly;
    bounded: root of E_Q r^{τ_y} e^{Y_{τ_y} - y} = 1 by Monte Carlo with
    common random numbers, valid when X⁻ ≤ B and r < e^{-B}.
    """
    tilted, mu = exponential_tilt(dist)
    r = rho * mu
    if r >= 1.0:
        raise ProblemError(f"Shepp-Shiryaev problem needs r = rho * E e^X < 1, got {r:.6g}")
    if mode == "skip-free":
        for y in range(cap + 1):
            if ss_first_passage_exact(tilted, r, y) <= math.exp(-1.0):
                return y
        raise ProblemError(f"no threshold below {cap}")
    if mode != "bounded":
        raise ValueError("mode must be 'skip-free' or 'bounded'")
    if B is None or dist.max_negative_part() > B:
        raise ProblemError("bounded mode needs X⁻ <= B")
    if r >= math.exp(-B):
        raise ProblemError(f"bounded mode needs r < e^-B = {math.exp(-B):.6g}, got r = {r:.6g}")
    problem = StoppingProblem(ChainModel(SHEPP_SHIRYAEV, dist), ExponentialReward(), rho)
    engine = MonteCarloEngine(problem, reps, stream, horizon)

    def excess(y):
        pt = engine.evaluate(y)
        return pt.phi.value / pt.g - 1.0

    if excess(0.0) <= 0:
        return 0.0
    hi = max(1.0, B)
    while excess(hi) > 0:
        hi *= 2.0
        if hi > cap:
            raise ProblemError(f"no threshold below {cap}")
    lo = 0.0
    while hi - lo > 1e-6 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- AR(1) with exponential jumps --------------------------------------------------------

def lambert_w(x: float, tol: float = 1e-15, max_iter: int = 100) -> float:
    """Principal branch W₀ by Halley iteration.

    Start: branch-point series near -1/e, log(1 + x) for moderate x and the
    asymptotic log x - log log x for x > e.
    """
    x = float(x)
    branch = -1.0 / math.e
    if x < branch:
        if x > branch - 1e-15:
            return -1.0
        raise ValueError(f"lambert_w is real only for x >= -1/e, got {x}")
    if x == 0.0:
        return 0.0
    if x == branch:
        return -1.0
    if x < -0.32:
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    elif x <= math.e:
        w = math.log1p(x)
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w_new = w - step
        if abs(w_new - w) <= tol * (1.0 + abs(w_new)):
            return w_new
        w = w_new
    return w


def ar1_exp_threshold(lam: float, mu: float, rho: float) -> float:
    """W((1 - λ)/γ) / ((1 - λ) μ) with γ = 1/ρ - 1, the fixed point of the closed display."""
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    if not mu > 0:
        raise ValueError("mu must be positive")
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    gamma = 1.0 / rho - 1.0
    return lambert_w((1.0 - lam) / gamma) / ((1.0 - lam) * mu)


# -- sum the odds ------------------------------------------------------------------------

def _fractions(probs: Sequence) -> list[Fraction]:
    # floats are read as the shortest decimal that prints them, so 0.2 is 1/5
    out = [Fraction(repr(p)) if isinstance(p, float) else Fraction(p) for p in probs]
    for p in out:
        if not 0 < p < 1:
            raise ValueError(f"odds probabilities must lie in (0, 1), got {p}")
    return out


def odds_threshold(probs: Sequence) -> int:
    """Smallest k ≥ 1 with Σ_{l>k} p_l/q_l ≤ 1, in exact rational arithmetic."""
    ps = _fractions(probs)
    if not ps:
        raise ValueError("need at least one trial")
    tail = Fraction(0)
    alpha = len(ps)
    # walk down from k = n while the tail sum stays <= 1
    for k in range(len(ps), 0, -1):
        if tail > 1:
            break
        alpha = k
        p = ps[k - 1]
        tail += p / (1 - p)
    return alpha


def odds_f(probs: Sequence, k: int) -> Fraction:
    """f(k) = 1 - Σ_{l>k} p_l/q_l."""
    ps = _fractions(probs)
    return 1 - sum((p / (1 - p) for p in ps[k:]), Fraction(0))


def odds_win_probability(probs: Sequence, k: int) -> Fraction:
    """P(the first success at index ≥ k is the last success), exactly."""
    ps = _fractions(probs)
    if not 1 <= k <= len(ps):
        raise ValueError("threshold index out of range")
    q_prod = Fraction(1)
    odds = Fraction(0)
    for p in ps[k - 1:]:
        q_prod *= 1 - p
        odds += p / (1 - p)
    return q_prod * odds


# -- example registry for the CLI --------------------------------------------------------

EXAMPLE_TAGS = ("novikov-shiryaev", "american-put", "logistic", "shepp-shiryaev", "ar1-exp", "odds")


@dataclass
class ExampleSpec:
    tag: str
    rho: float
    dist: Optional[IncrementDistribution] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in EXAMPLE_TAGS:
            raise ProblemError(f"unknown example {self.tag!r}; expected one of {EXAMPLE_TAGS}")


def build_problem(spec: ExampleSpec) -> StoppingProblem:
    """The generic stopping problem behind an example."""
    t, p = spec.tag, spec.params
    if t == "novikov-shiryaev":
        return random_walk(spec.dist, PowerReward(p.get("nu", 1.0)), spec.rho)
    if t == "american-put":
        return random_walk(spec.dist, PutReward(p.get("K", 1.0)), spec.rho, DESCENDING)
    if t == "logistic":
        return random_walk(spec.dist, LogisticReward(p.get("K", 1.0), p.get("eta", 1.0)), spec.rho)
    if t == "shepp-shiryaev":
        return StoppingProblem(ChainModel(SHEPP_SHIRYAEV, spec.dist), ExponentialReward(), spec.rho)
    if t == "ar1-exp":
        dist = spec.dist or TwoSidedExp(p.get("mu", 1.0))
        return StoppingProblem(ChainModel(AR1, dist, lam=p.get("lambda", 0.5)), PowerReward(1.0), spec.rho)
    probs = tuple(p["probs"])
    return StoppingProblem(ChainModel(ODDS, probs=probs), OddsReward(probs), spec.rho)


def closed_form_threshold(spec: ExampleSpec, bank: Optional[LadderBank] = None) -> float:
    """The example's own threshold formula, using ``bank`` where one is needed."""
    t, p = spec.tag, spec.params
    if t == "odds":
        return float(odds_threshold(p["probs"]))
    if t == "ar1-exp":
        return ar1_exp_threshold(p.get("lambda", 0.5), p.get("mu", 1.0), spec.rho)
    if t == "shepp-shiryaev":
        return float(shepp_shiryaev_threshold(spec.dist, spec.rho, p.get("B"), p.get("mode", "skip-free")))
    if t == "american-put":
        if bank is None:
            bank = exact_ladder_bank(spec.dist, spec.rho, descending=True)
        return american_put_threshold(spec.dist, spec.rho, p.get("K", 1.0), bank)
    if bank is None:
        bank = exact_ladder_bank(spec.dist, spec.rho)
    if t == "novikov-shiryaev":
        return ns_threshold(spec.dist, spec.rho, p.get("nu", 1.0), bank)
    return logistic_threshold(spec.dist, spec.rho, p.get("K", 1.0), p.get("eta", 1.0), bank)
