"""The ladder payoff φ(y) = E_y ρ^{τ_y} g(Y_{τ_y}) and the discount factor E_y ρ^{τ_y}.

Three kinds of backend are provided:

* Monte Carlo over ladder samples (any simulable chain), with common random
  numbers across starting points;
* a shared ladder bank for random walks, where one set of (τ₊, S_{τ₊})
  draws serves every y;
* closed forms: exponential overshoot for random walks and AR(1) chains with
  Exp(μ) upward jumps, exact finite sums for the odds chain and an exact
  linear system for the skip-free Shepp-Shiryaev chain.

Engines wrap a backend behind ``evaluate(y) -> PhiPoint`` so the threshold
search does not need to know which one it is using.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from .distributions import DivergenceError, IncrementDistribution, TwoSidedExp
from .ladder import LadderBank, ladder_bank_rw, simulate_ladder_batch
from .models import (
    AR1,
    ASCENDING,
    ODDS,
    RANDOM_WALK,
    SHEPP_SHIRYAEV,
    ProblemError,
    StoppingProblem,
    laplace_exponents,
)
from .rewards import ConstantReward, Reward, exp_overshoot_integral
from .rng import as_stream

SERIES_TOL = 1e-12


@dataclass(frozen=True)
class PhiEstimate:
    value: float
    stderr: float
    replications: int
    bias_bound: float
    engine: str

    def __post_init__(self):
        if self.value < 0 or self.stderr < 0:
            raise ValueError("PhiEstimate needs value >= 0 and stderr >= 0")


@dataclass(frozen=True)
class PhiPoint:
    """φ and the discount factor at one y, with their covariance."""

    y: float
    g: float
    phi: PhiEstimate
    disc: PhiEstimate
    cov: float = 0.0

    @property
    def exact(self) -> bool:
        return self.phi.stderr == 0.0 and self.disc.stderr == 0.0


def _bias_bound(bank: LadderBank, sup_g: float) -> float:
    if not bank.truncated.any():
        return 0.0
    return bank.truncated_fraction * bank.discount ** bank.horizon * sup_g


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = len(values)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return mean, se


def _payoffs(bank: LadderBank, reward: Reward, ends: np.ndarray) -> np.ndarray:
    out = np.zeros(len(bank))
    hit = bank.epoch > 0
    out[hit] = bank.weight[hit] * reward(ends[hit])
    return out


# -- Monte Carlo --------------------------------------------------------------

def phi_mc(problem: StoppingProblem, y: float, reps: int, horizon: Optional[int], rng,
           crn: bool = True) -> PhiEstimate:
    """Sample mean of ρ^τ g(Y_τ) over independent ladder samples from y."""
    if reps < 2:
        raise ValueError("phi_mc needs reps >= 2")
    bank = simulate_ladder_batch(problem, y, reps, rng, horizon=horizon, crn=crn)
    value, se = _mean_se(_payoffs(bank, problem.reward, bank.end))
    return PhiEstimate(max(value, 0.0), se, reps, _bias_bound(bank, problem.reward.sup), "mc")


def _require_walk_bank(problem: StoppingProblem, bank: LadderBank) -> None:
    if problem.model.kind != RANDOM_WALK:
        raise ProblemError("phi_rw needs a random-walk model")
    if len(bank) == 0:
        raise ValueError("ladder bank is empty")


def _bank_moments(bank: LadderBank, values: np.ndarray) -> tuple[float, float]:
    if bank.exact:
        return float(bank.mass @ values), 0.0
    return _mean_se(values)


def phi_rw(problem: StoppingProblem, y: float, bank: LadderBank) -> PhiEstimate:
    """φ(y) = E ρ^{τ₊} g(y + S_{τ₊}) on a shared bank."""
    _require_walk_bank(problem, bank)
    value, se = _bank_moments(bank, _payoffs(bank, problem.reward, y + bank.overshoot))
    return PhiEstimate(max(value, 0.0), se, len(bank), _bias_bound(bank, problem.reward.sup), "bank")


def discount_factor(problem: StoppingProblem, y: float, bank: Optional[LadderBank] = None,
                    reps: Optional[int] = None, horizon: Optional[int] = None, rng=None) -> PhiEstimate:
    """E_y ρ^{τ_y}: from a random-walk bank if given, otherwise by Monte Carlo."""
    if bank is not None:
        _require_walk_bank(problem, bank)
        value, se = _bank_moments(bank, bank.weight)
        return PhiEstimate(value, se, len(bank), _bias_bound(bank, 1.0), "bank")
    if reps is None or rng is None:
        raise ValueError("discount_factor needs either a bank or reps and rng")
    unit = StoppingProblem(problem.model, ConstantReward(1.0), problem.rho, problem.direction, problem.b)
    est = phi_mc(unit, y, reps, horizon, rng)
    return PhiEstimate(est.value, est.stderr, reps, est.bias_bound, "mc")


# -- AR(1) with exponential upward jumps -----------------------------------------

def eta(u: float, psi: Callable[[float], float], lam: float, tail_tol: float = 1e-15,
        max_terms: int = 100_000) -> float:
    """η(u) = Σ_{k≥0} ψ(λ^k u), stopped once the geometric tail bound drops below ``tail_tol``."""
    if not 0.0 < lam < 1.0:
        raise ValueError("eta needs 0 < lambda < 1")
    total, prev = 0.0, None
    for k in range(max_terms):
        term = psi(lam ** k * u)
        total += term
        if prev is not None:
            if term == 0.0 and prev == 0.0:
                return total
            ratio = abs(term / prev) if prev != 0.0 else 1.0
            if ratio < 1.0:
                q = max(ratio, lam)
                if abs(term) * q / (1.0 - q) < tail_tol:
                    return total
        prev = term
    raise DivergenceError(f"eta({u}) did not converge in {max_terms} terms: psi must vanish at 0")


class AR1ExpSeries:
    """Ratio of series giving E_y ρ^{τ_y} for Y_n = λY_{n-1} + X_n, X⁺ ~ Exp(μ).

    With A_n = ρⁿ exp(λⁿμy - η(λⁿμ)) and B_n = ρⁿ exp(λⁿμy - η(λ^{n+1}μ) - ψ₂(λⁿμ)),
    E_y ρ^{τ_y} = Σ_{n≥1} A_n / Σ_{n≥0} B_n, and since the overshoot is Exp(μ)
    independently of τ_y, φ(y) = E_y ρ^{τ_y} · ∫ g(y+x) μ e^{-μx} dx.

    The y-free parts of the exponents are computed once and extended on demand.
    """

    def __init__(self, lam: float, mu: float, psi, psi2, rho: float, tol: float = SERIES_TOL):
        if not 0.0 < lam < 1.0:
            raise ProblemError("AR(1) series needs 0 < lambda < 1")
        if not 0.0 < rho < 1.0:
            raise ProblemError("AR(1) series needs 0 < rho < 1")
        if not mu > 0:
            raise ProblemError("AR(1) series needs mu > 0")
        self.lam, self.mu, self.psi, self.psi2, self.rho, self.tol = lam, mu, psi, psi2, rho, tol
        self._psi_j = self._psi_table()
        # suffix sums: eta_n = η(λⁿμ) for n >= 1
        j = len(self._psi_j)
        tail = abs(self._psi_j[-1]) * lam / (1.0 - lam)
        suffix = np.cumsum(self._psi_j[::-1])[::-1]
        self._eta = np.concatenate([[math.nan], suffix, [0.0]])  # index n, valid for 1 <= n <= j+1
        self._eta_tail = tail
        self._n_grid = 0
        self._extend(max(64, math.ceil(math.log(tol * (1 - rho) * 1e-3) / math.log(rho))))

    def _psi_table(self) -> np.ndarray:
        vals = []
        j = 1
        while True:
            v = self.psi(self.lam ** j * self.mu)
            vals.append(v)
            if j > 5 and abs(v) * self.lam / (1.0 - self.lam) < 1e-18:
                break
            j += 1
            if j > 1_000_000:
                raise DivergenceError("psi does not vanish at 0")
        return np.asarray(vals)

    def _eta_at(self, n: np.ndarray) -> np.ndarray:
        # η(λⁿμ), n >= 1; beyond the table psi is below resolution
        n = np.asarray(n)
        return np.where(n < len(self._eta), self._eta[np.minimum(n, len(self._eta) - 1)], 0.0)

    def _extend(self, n_terms: int) -> None:
        n = np.arange(n_terms + 1)
        lr = math.log(self.rho)
        self._exps = self.lam ** n * self.mu
        eta_n = np.concatenate([[math.nan], self._eta_at(n[1:])])
        self._a = n * lr - eta_n                           # used for n >= 1
        psi2 = np.array([self.psi2(v) for v in self._exps])
        self._b = n * lr - self._eta_at(n + 1) - psi2       # used for n >= 0
        self._n_grid = n_terms

    def discount(self, y: float) -> tuple[float, float]:
        """E_y ρ^{τ_y} and a relative tail bound."""
        while True:
            shift = self._exps * y
            log_num = logsumexp(self._a[1:] + shift[1:])
            log_den = logsumexp(self._b + shift)
            N = self._n_grid
            # tail beyond N: ρ^{N+1}/(1-ρ) * exp(λ^{N+1} μ y + |η| slack)
            slack = abs(self._exps[-1] * y) + abs(float(self._eta_at(np.array([N]))[0])) + self._eta_tail
            log_tail = (N + 1) * math.log(self.rho) - math.log1p(-self.rho) + slack + 1.0
            rel = math.exp(log_tail - min(log_num, log_den))
            if rel < self.tol or N > 10_000_000:
                return math.exp(log_num - log_den), rel
            self._extend(2 * N)

    def phi(self, reward: Reward, y: float) -> tuple[float, float, float]:
        """(φ(y), E_y ρ^{τ_y}, relative tail bound)."""
        disc, rel = self.discount(y)
        return disc * exp_overshoot_integral(reward, y, self.mu), disc, rel


def phi_ar1_exp(lam: float, mu: float, psi, psi2, rho: float, reward: Reward, y: float,
                tol: float = SERIES_TOL) -> PhiEstimate:
    """φ(y) for the AR(1) chain with Exp(μ) upward innovations, from the series ratio."""
    if not y > 0:
        raise ProblemError("the AR(1) series is stated for y > 0")
    value, _, rel = AR1ExpSeries(lam, mu, psi, psi2, rho, tol).phi(reward, y)
    return PhiEstimate(value, 0.0, 0, rel * value, "ar1-exp")


def phi_ar1_exp_simplified(lam: float, mu: float, rho: float, reward: Reward, y: float) -> PhiEstimate:
    """The closed display e^{-μ(1-λ)y} / (γ + e^{-μ(1-λ)y}) · ∫ g(y+x) μe^{-μx} dx, γ = 1/ρ - 1.

    This expression is the λ → 0 form of the series; for λ ∈ (0, 1) it is
    not equal to φ.  It is kept because the Lambert-W threshold solves it.
    """
    gamma = 1.0 / rho - 1.0
    e = math.exp(-mu * (1.0 - lam) * y)
    value = e / (gamma + e) * exp_overshoot_integral(reward, y, mu)
    return PhiEstimate(value, 0.0, 0, 0.0, "ar1-exp-simplified")


# -- random walk with exponential upward jumps -------------------------------------

def solve_b_root(dist: IncrementDistribution, rho: float, xtol: float = 1e-15) -> float:
    """The root b > 1 of E b^{X₁} = 1/ρ, with log b in (0, μ)."""
    if not isinstance(dist, TwoSidedExp):
        raise ProblemError("b_root is defined for Exp(mu) upward jumps")
    if not 0.0 < rho < 1.0:
        raise ProblemError("b_root needs 0 < rho < 1")
    target = -math.log(rho)
    h = lambda t: dist.log_mgf(t) - target
    hi, k = dist.mu * 0.5, 1
    while h(hi) <= 0:
        k += 1
        hi = dist.mu * (1.0 - 2.0 ** -k)
        if k > 60:
            raise DivergenceError("E b^X stays below 1/rho on (1, e^mu)")
    # log_mgf may dip below 0 first for negative drift; the root sought is the one above
    lo = 0.0
    if dist.mean() < 0:
        lo = optimize.minimize_scalar(lambda t: dist.log_mgf(t), bounds=(0.0, hi), method="bounded").x
    theta = optimize.bisect(h, lo, hi, xtol=xtol, maxiter=400)
    return math.exp(theta)


def phi_rw_exp_overshoot(mu: float, b_root: float, rho: float, reward: Reward, y: float) -> PhiEstimate:
    """φ(y) = ((μ - log b)/μ) ∫ g(y+x) μ e^{-μx} dx."""
    log_b = math.log(b_root)
    if log_b >= mu:
        raise DivergenceError("log b_root >= mu: the martingale integral diverges")
    c = (mu - log_b) / mu
    return PhiEstimate(c * exp_overshoot_integral(reward, y, mu), 0.0, 0, 0.0, "exp-overshoot")


# -- exact finite computations -----------------------------------------------------

def odds_ladder(probs: tuple, k: int, rho: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Law of the next success index after index |k|: (indices j, E[ρ^{j-|k|}; next success = j])."""
    n = len(probs)
    t = abs(int(k))
    idx = np.arange(t + 1, n + 1)
    p = np.asarray(probs, dtype=float)
    q = 1.0 - p
    before = np.concatenate([[1.0], np.cumprod(q[t:n - 1])]) if t < n else np.array([])
    return idx, rho ** (idx - t) * p[t:] * before


def ss_first_passage_exact(tilted: IncrementDistribution, r: float, y: int) -> float:
    """E_Q r^{τ_y} for Y_{n+1} = (Y_n - X)⁺ started at y, τ_y = inf{n > 0 : Y_n > y}.

    Requires integer increments whose only negative value is -1, so the
    chain can rise above y only by landing on y + 1.  Solved exactly as a
    linear system on the states {0, ..., y}.
    """
    if not tilted.is_skip_free_down():
        raise ProblemError("the exact first-passage system needs integer increments with X = -1 on {X < 0}")
    if y < 0 or y != int(y):
        raise ProblemError("skip-free Shepp-Shiryaev states are non-negative integers")
    y = int(y)
    values, probs = tilted.atoms()
    m = y + 1
    A = np.eye(m)
    rhs = np.zeros(m)
    for z in range(m):
        for x, w in zip(values, probs):
            if w == 0:
                continue
            nxt = max(z - int(x), 0)
            if nxt > y:
                rhs[z] += r * w
            else:
                A[z, nxt] -= r * w
    return float(np.linalg.solve(A, rhs)[y])


# -- engines -------------------------------------------------------------------------

class PhiEngine:
    """Evaluates φ and the discount factor on one ascending problem."""

    name = "engine"
    exact = False
    integer = False

    def __init__(self, problem: StoppingProblem):
        if problem.direction != ASCENDING:
            raise ProblemError("engines work on ascending problems; mirror descending ones first")
        self.problem = problem

    def evaluate(self, y: float) -> PhiPoint:
        raise NotImplementedError

    def evaluate_many(self, ys: Iterable[float]) -> list[PhiPoint]:
        return [self.evaluate(float(y)) for y in ys]

    def phi(self, y: float) -> PhiEstimate:
        return self.evaluate(y).phi

    def discount_factor(self, y: float) -> PhiEstimate:
        return self.evaluate(y).disc

    def recommended_reps(self, se_now: float, se_needed: float) -> Optional[int]:
        return None


class BankEngine(PhiEngine):
    """Shared ladder bank for a random walk: the same draws serve every y."""

    name = "bank"

    def __init__(self, problem: StoppingProblem, bank: LadderBank):
        super().__init__(problem)
        _require_walk_bank(problem, bank)
        self.bank = bank
        self.exact = bank.exact
        self._hit = bank.epoch > 0
        self._w = bank.weight[self._hit]
        self._s = bank.overshoot[self._hit]
        self._n = len(bank)
        self._bias = _bias_bound(bank, problem.reward.sup)
        if bank.exact:
            self._mass = bank.mass[self._hit]
            d = float(self._mass @ self._w)
            self._disc = PhiEstimate(d, 0.0, len(bank), 0.0, self.name)
        else:
            d, se = _mean_se(bank.weight)
            self._disc = PhiEstimate(d, se, len(bank), _bias_bound(bank, 1.0), self.name)

    @classmethod
    def simulate(cls, problem: StoppingProblem, reps: int, stream, horizon=None, workers=1, y_ref=None):
        return cls(problem, ladder_bank_rw(problem, reps, stream, horizon, workers, y_ref))

    def recommended_reps(self, se_now, se_needed):
        if self.exact or se_needed <= 0:
            return None
        return int(math.ceil(self._n * (se_now / se_needed) ** 2))

    def evaluate(self, y):
        g = float(self.problem.reward(y))
        pay = self._w * self.problem.reward(y + self._s)
        if self.exact:
            phi = PhiEstimate(max(float(self._mass @ pay), 0.0), 0.0, self._n, 0.0, self.name)
            return PhiPoint(y, g, phi, self._disc, 0.0)
        # entries without a crossing contribute zeros to every sum
        n = self._n
        m_pay, m_w = pay.sum() / n, self._disc.value
        var_pay = max((pay @ pay - n * m_pay ** 2) / (n - 1), 0.0)
        cov = float((pay @ self._w - n * m_pay * m_w) / (n - 1)) / n
        phi = PhiEstimate(max(float(m_pay), 0.0), math.sqrt(var_pay / n), n, self._bias, self.name)
        return PhiPoint(y, g, phi, self._disc, cov)


class MonteCarloEngine(PhiEngine):
    """Fresh ladder samples at each y, drawn from one fixed stream (common random numbers)."""

    name = "mc"

    def __init__(self, problem: StoppingProblem, reps: int, stream, horizon: Optional[int] = None,
                 workers: int = 1):
        super().__init__(problem)
        if reps < 2:
            raise ValueError("Monte Carlo engine needs reps >= 2")
        self.reps, self.stream, self.horizon, self.workers = reps, as_stream(stream), horizon, workers
        self.integer = problem.model.kind == SHEPP_SHIRYAEV and problem.model.driving_law.is_integer_valued()

    def recommended_reps(self, se_now, se_needed):
        return int(math.ceil(self.reps * (se_now / se_needed) ** 2)) if se_needed > 0 else None

    def evaluate(self, y):
        p = self.problem
        bank = simulate_ladder_batch(p, y, self.reps, self.stream, self.horizon, crn=True, workers=self.workers)
        pay = _payoffs(bank, p.reward, bank.end)
        m_pay, se_pay = _mean_se(pay)
        m_w, se_w = _mean_se(bank.weight)
        cov = float(np.cov(pay, bank.weight, ddof=1)[0, 1]) / self.reps
        phi = PhiEstimate(max(m_pay, 0.0), se_pay, self.reps, _bias_bound(bank, p.reward.sup), self.name)
        disc = PhiEstimate(m_w, se_w, self.reps, _bias_bound(bank, 1.0), self.name)
        return PhiPoint(y, float(p.reward(y)), phi, disc, cov)


class AR1ExpEngine(PhiEngine):
    name = "ar1-exp"
    exact = True

    def __init__(self, problem: StoppingProblem, tol: float = SERIES_TOL):
        super().__init__(problem)
        model = problem.model
        if model.kind != AR1 or not isinstance(model.increment, TwoSidedExp):
            raise ProblemError("ar1-exp engine needs an AR(1) chain with two-sided exponential innovations")
        psi, psi2 = laplace_exponents(model.increment)
        self.mu = model.increment.mu
        self.series = AR1ExpSeries(model.lam, self.mu, psi, psi2, problem.rho, tol)

    def evaluate(self, y):
        if not y > 0:
            raise ProblemError("the AR(1) series is stated for y > 0")
        phi, disc, rel = self.series.phi(self.problem.reward, y)
        return PhiPoint(y, float(self.problem.reward(y)),
                        PhiEstimate(phi, 0.0, 0, rel * phi, self.name),
                        PhiEstimate(disc, 0.0, 0, rel * disc, self.name))


class ExpOvershootEngine(PhiEngine):
    name = "exp-overshoot"
    exact = True

    def __init__(self, problem: StoppingProblem):
        super().__init__(problem)
        dist = problem.model.increment
        if problem.model.kind != RANDOM_WALK or not isinstance(dist, TwoSidedExp):
            raise ProblemError("exp-overshoot engine needs a random walk with Exp(mu) upward jumps")
        self.mu = dist.mu
        self.b_root = solve_b_root(dist, problem.rho)
        self.c = (self.mu - math.log(self.b_root)) / self.mu

    def evaluate(self, y):
        phi = phi_rw_exp_overshoot(self.mu, self.b_root, self.problem.rho, self.problem.reward, y)
        disc = PhiEstimate(self.c, 0.0, 0, 0.0, self.name)
        return PhiPoint(y, float(self.problem.reward(y)), phi, disc)


class OddsEngine(PhiEngine):
    """Exact sums over the next success index."""

    name = "odds"
    exact = True
    integer = True

    def __init__(self, problem: StoppingProblem):
        super().__init__(problem)
        if problem.model.kind != ODDS:
            raise ProblemError("odds engine needs the odds chain")
        self.probs = problem.model.probs

    def evaluate(self, y):
        if y != int(y):
            raise ProblemError("odds chain states are integers")
        idx, w = odds_ladder(self.probs, int(y), self.problem.rho)
        phi = float(w @ self.problem.reward(idx.astype(float))) if len(idx) else 0.0
        disc = float(w.sum()) if len(idx) else 0.0
        return PhiPoint(float(y), float(self.problem.reward(float(y))),
                        PhiEstimate(phi, 0.0, 0, 0.0, self.name), PhiEstimate(disc, 0.0, 0, 0.0, self.name))


class SheppShiryaevExactEngine(PhiEngine):
    """Skip-free reflected chain under the tilted law: φ(y) = e^{y+1} E_Q r^{τ_y}."""

    name = "ss-exact"
    exact = True
    integer = True

    def __init__(self, problem: StoppingProblem):
        super().__init__(problem)
        if problem.model.kind != SHEPP_SHIRYAEV:
            raise ProblemError("ss-exact engine needs the Shepp-Shiryaev chain")
        problem.require_simulable()
        self.tilted = problem.model.driving_law
        self.r = problem.discount

    def evaluate(self, y):
        h = ss_first_passage_exact(self.tilted, self.r, y)
        g = float(self.problem.reward(float(y)))
        phi = float(self.problem.reward(float(y) + 1.0)) * h
        return PhiPoint(float(y), g, PhiEstimate(phi, 0.0, 0, 0.0, self.name),
                        PhiEstimate(h, 0.0, 0, 0.0, self.name))


ENGINE_KINDS = ("auto", "bank", "mc", "ar1-exp", "exp-overshoot", "odds", "ss-exact")


def make_engine(problem: StoppingProblem, kind: str = "auto", reps: int = 100_000, stream=0,
                horizon: Optional[int] = None, workers: int = 1) -> PhiEngine:
    """Choose a φ backend; ``auto`` prefers closed forms where the model has one."""
    if kind not in ENGINE_KINDS:
        raise ProblemError(f"unknown engine {kind!r}; expected one of {ENGINE_KINDS}")
    model = problem.model
    if kind == "auto":
        if model.kind == ODDS:
            kind = "odds"
        elif model.kind == SHEPP_SHIRYAEV:
            kind = "ss-exact" if model.driving_law.is_skip_free_down() else "mc"
        elif model.kind == AR1:
            kind = "ar1-exp" if isinstance(model.increment, TwoSidedExp) else "mc"
        elif isinstance(model.increment, TwoSidedExp):
            kind = "exp-overshoot"
        else:
            kind = "bank"
    if kind == "bank":
        return BankEngine.simulate(problem, reps, stream, horizon, workers)
    if kind == "mc":
        return MonteCarloEngine(problem, reps, stream, horizon, workers)
    return {"ar1-exp": AR1ExpEngine, "exp-overshoot": ExpOvershootEngine, "odds": OddsEngine,
            "ss-exact": SheppShiryaevExactEngine}[kind](problem)


def sweep(engine: PhiEngine, ys: Iterable[float]) -> list[PhiPoint]:
    return engine.evaluate_many(ys)


def write_sweep_csv(points: list[PhiPoint], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["y", "g", "phi", "phi_stderr", "discount_factor", "engine"])
    for pt in points:
        writer.writerow([format(pt.y, ".17g"), format(pt.g, ".17g"), format(pt.phi.value, ".17g"),
                         format(pt.phi.stderr, ".17g"), format(pt.disc.value, ".17g"), pt.phi.engine])
