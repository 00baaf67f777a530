"""Chain dynamics, stopping problems and the (Opt) validity check."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .distributions import (
    Bernoulli,
    DivergenceError,
    FinitePMF,
    Gaussian,
    IncrementDistribution,
    TwoSidedExp,
)
from .rewards import (
    ConstantReward,
    ExponentialReward,
    LogisticReward,
    OddsReward,
    PowerReward,
    PutReward,
    Reward,
    TableReward,
)

RANDOM_WALK = "random-walk"
AR1 = "ar1"
SHEPP_SHIRYAEV = "shepp-shiryaev"
ODDS = "odds"
CHAIN_KINDS = (RANDOM_WALK, AR1, SHEPP_SHIRYAEV, ODDS)

RHO_ONE_MESSAGE = (
    "rho = 1 is only supported for the odds chain: the ladder epoch must be "
    "allowed to be infinite with positive probability, which simulation can "
    "certify only for chains with absorbing states"
)


class ProblemError(ValueError):
    """Invalid model or problem specification."""


@dataclass(frozen=True)
class ChainModel:
    """Markov dynamics on the real line driven by i.i.d. innovations.

    For ``shepp-shiryaev`` the ``increment`` is the law under the original
    measure P; the chain itself is driven by the exponentially tilted law
    (``driving_law``), since that is the measure under which the reflected
    process Y_{n+1} = (Y_n - X_{n+1})⁺ is Markov with reward e^Y.
    """

    kind: str
    increment: Optional[IncrementDistribution] = None
    lam: Optional[float] = None
    probs: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in CHAIN_KINDS:
            raise ProblemError(f"unknown chain kind {self.kind!r}; expected one of {CHAIN_KINDS}")
        if self.kind == ODDS:
            if not self.probs:
                raise ProblemError("odds chain needs success probabilities")
            for p in self.probs:
                if not 0.0 < float(p) < 1.0:
                    raise ProblemError(f"odds probabilities must lie in (0, 1), got {p}")
            object.__setattr__(self, "probs", tuple(self.probs))
        elif self.increment is None:
            raise ProblemError(f"{self.kind} chain needs an increment distribution")
        if self.kind == AR1:
            if self.lam is None or not 0.0 < self.lam < 1.0:
                raise ProblemError(f"ar1 requires 0 < lambda < 1, got {self.lam}")

    @property
    def n(self) -> int:
        return len(self.probs)

    @cached_property
    def _tilt(self):
        return self.increment.tilt()

    @property
    def driving_law(self) -> Optional[IncrementDistribution]:
        if self.kind == SHEPP_SHIRYAEV:
            return self._tilt[0]
        return self.increment

    @property
    def tilt_mu(self) -> float:
        return self._tilt[1]

    @property
    def state_space(self) -> tuple[float, float]:
        if self.kind == SHEPP_SHIRYAEV:
            return (0.0, math.inf)
        if self.kind == ODDS:
            return (-float(self.n), float(self.n))
        return (-math.inf, math.inf)

    def contains(self, y) -> bool:
        lo, hi = self.state_space
        y = np.asarray(y)
        ok = (y >= lo) & (y <= hi)
        if self.kind == ODDS:
            ok &= np.equal(np.mod(y, 1.0), 0.0)
        return bool(np.all(ok))

    def draw(self, rng: np.random.Generator, size=None):
        """Innovations for one step; uniforms for the odds chain."""
        if self.kind == ODDS:
            return rng.random(size)
        return self.driving_law.sample(rng, size)

    def step(self, state, x):
        if self.kind == RANDOM_WALK:
            return state + x
        if self.kind == AR1:
            return self.lam * state + x
        if self.kind == SHEPP_SHIRYAEV:
            return np.maximum(state - x, 0.0)
        return self._odds_step(state, x)

    def _odds_step(self, state, u):
        state = np.asarray(state, dtype=float)
        t = np.abs(state).astype(int)
        absorbed = t >= self.n
        p_next = np.asarray(self.probs + (0.0,), dtype=float)[np.minimum(t, self.n)]
        nxt = np.where(np.asarray(u) < p_next, t + 1.0, -(t + 1.0))
        out = np.where(absorbed, state, nxt)
        return out if out.ndim else float(out)

    def certified_never_exceeds(self, state, y):
        """True where the chain provably never again rises above y."""
        if self.kind != ODDS:
            return np.zeros(np.shape(state), dtype=bool)
        state = np.asarray(state)
        return (np.abs(state) >= self.n) & (state <= y)

    def negate(self) -> "ChainModel":
        if self.kind == RANDOM_WALK:
            return ChainModel(RANDOM_WALK, self.increment.negate())
        if self.kind == AR1:
            return ChainModel(AR1, self.increment.negate(), lam=self.lam)
        raise ProblemError(f"{self.kind} chain has no mirror image")

    def describe(self) -> str:
        if self.kind == ODDS:
            return f"odds(n={self.n})"
        extra = f", lambda={self.lam:g}" if self.kind == AR1 else ""
        return f"{self.kind}({self.increment}{extra})"


ASCENDING = "ascending"
DESCENDING = "descending"


@dataclass(frozen=True)
class StoppingProblem:
    """sup over stopping times τ of E_y rho^τ g(Y_τ)."""

    model: ChainModel
    reward: Reward
    rho: float
    direction: str = ASCENDING
    boundary_b: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0:
            raise ProblemError(f"rho must lie in (0, 1], got {self.rho}")
        if self.direction not in (ASCENDING, DESCENDING):
            raise ProblemError(f"direction must be ascending or descending, got {self.direction!r}")
        side, b = self.reward.support
        expected = "above" if self.direction == ASCENDING else "below"
        if side != expected and b not in (-math.inf, math.inf):
            raise ProblemError(
                f"reward {self.reward.describe()} is positive {side} {b}, "
                f"which does not fit a {self.direction} problem")
        if self.boundary_b is None:
            if side != expected:
                b = -math.inf if self.direction == ASCENDING else math.inf
            object.__setattr__(self, "boundary_b", float(b))
        elif side == expected and math.isfinite(b) and not math.isclose(self.boundary_b, b, abs_tol=1e-12):
            raise ProblemError(f"boundary_b = {self.boundary_b} disagrees with the reward's support ({b})")

    @property
    def b(self) -> float:
        return self.boundary_b

    @property
    def discount(self) -> float:
        """Per-step discount of the chain that is actually simulated."""
        if self.model.kind == SHEPP_SHIRYAEV:
            return self.rho * self.model.tilt_mu
        return self.rho

    def g(self, y):
        return self.reward(y)

    def require_simulable(self) -> None:
        if self.rho >= 1.0 and self.model.kind != ODDS:
            raise ProblemError(RHO_ONE_MESSAGE)
        if self.model.kind == SHEPP_SHIRYAEV:
            r = self.discount
            if r >= 1.0:
                raise ProblemError(f"Shepp-Shiryaev problem needs r = rho * E e^X < 1, got r = {r:.6g}")

    def describe(self) -> str:
        return (f"{self.model.describe()}, g={self.reward.describe()}, rho={self.rho:g}, "
                f"{self.direction}, b={self.b:g}")


def sample_increment(dist: IncrementDistribution, rng: np.random.Generator) -> float:
    return float(dist.sample(rng))


def step(model: ChainModel, state, x):
    return model.step(state, x)


def laplace_exponents(dist: IncrementDistribution) -> tuple[Callable[[float], float], Callable[[float], float]]:
    """Return (psi, psi2) with exp(psi(u)) = E e^{uX} and exp(psi2(u)) = E e^{-uX⁻}.

    For X = X⁺ - X⁻ this gives exp(psi) = exp(psi2) * E e^{uX⁺}.  This is the
    sign under which the AR(1) series for the ladder payoff is correct.
    """

    def psi(u: float) -> float:
        val = dist.log_mgf(u)
        if not math.isfinite(val):
            raise DivergenceError(f"E exp(uX) is infinite at u = {u}")
        return val

    def psi2(u: float) -> float:
        val = dist.log_laplace_negative_part(u)
        if not math.isfinite(val):
            raise DivergenceError(f"E exp(-uX⁻) is infinite at u = {u}")
        return val

    return psi, psi2


def exponential_tilt(dist: IncrementDistribution) -> tuple[IncrementDistribution, float]:
    tilted, mu = dist.tilt()
    if not math.isfinite(mu):
        raise DivergenceError("E exp(X) is infinite")
    return tilted, mu


@dataclass
class OptReport:
    status: str  # "pass" | "fail" | "unverified"
    reason: str
    checks: dict = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return self.status == "pass"


def validate_opt_condition(problem: StoppingProblem) -> OptReport:
    """Check E sup rho^n g(Y_n) < inf and rho^n g(Y_n) -> 0 by known criteria."""
    model, reward, rho = problem.model, problem.reward, problem.rho
    checks: dict = {"rho": rho}

    if model.kind == SHEPP_SHIRYAEV:
        try:
            mu = exponential_tilt(model.increment)[1]
        except DivergenceError:
            return OptReport("fail", "E exp(X) is infinite", checks)
        r = rho * mu
        checks.update(mu=mu, r=r)
        if r < 1.0:
            return OptReport("pass", f"r = rho * E e^X = {r:.6g} < 1", checks)
        return OptReport("fail", f"r = rho * E e^X = {r:.6g} >= 1", checks)

    if model.kind == ODDS:
        return OptReport("pass", "finite horizon n with bounded reward", checks)

    bounded = math.isfinite(reward.sup)
    checks["bounded_reward"] = bounded
    if bounded and rho < 1.0:
        return OptReport("pass", f"bounded reward (sup g = {reward.sup:g}) with rho < 1", checks)

    dist = model.increment
    if isinstance(reward, PowerReward):
        nu = reward.nu
        if rho < 1.0:
            ok = dist.has_moment(nu)
            checks["moment_positive_nu"] = ok
            if ok:
                return OptReport("pass", f"rho < 1 and E (X⁺)^{nu:g} finite", checks)
            return OptReport("unverified", f"E (X⁺)^{nu:g} not known to be finite", checks)
        if model.kind == RANDOM_WALK:
            drift = dist.mean()
            ok = dist.has_moment(nu + 1.0)
            checks.update(drift=drift, moment_positive_nu_plus_1=ok)
            if drift < 0 and ok:
                return OptReport("pass", f"rho = 1, E X = {drift:.6g} < 0, E (X⁺)^{nu + 1:g} finite", checks)
            return OptReport("unverified", "rho = 1 requires E X < 0 and E (X⁺)^(nu+1) finite", checks)

    if isinstance(reward, ExponentialReward) and model.kind == RANDOM_WALK and rho < 1.0:
        log_mu = dist.log_mgf(1.0)
        checks["rho_mu"] = rho * math.exp(log_mu) if math.isfinite(log_mu) else math.inf
        if checks["rho_mu"] < 1.0:
            return OptReport("pass", "rho * E e^X < 1", checks)
        return OptReport("unverified", "rho * E e^X >= 1", checks)

    return OptReport("unverified", f"no criterion known for {reward.describe()} on {model.kind}", checks)


# -- construction helpers ----------------------------------------------------

def random_walk(dist: IncrementDistribution, reward: Reward, rho: float, direction: str = ASCENDING,
                boundary_b: Optional[float] = None) -> StoppingProblem:
    return StoppingProblem(ChainModel(RANDOM_WALK, dist), reward, rho, direction, boundary_b)


__all__ = [
    "AR1", "ASCENDING", "Bernoulli", "ChainModel", "ConstantReward", "DESCENDING", "FinitePMF",
    "Gaussian", "LogisticReward", "ODDS", "OddsReward", "OptReport", "PowerReward", "ProblemError",
    "PutReward", "RANDOM_WALK", "RHO_ONE_MESSAGE", "SHEPP_SHIRYAEV", "StoppingProblem", "TableReward",
    "TwoSidedExp", "exponential_tilt", "laplace_exponents", "random_walk", "sample_increment",
    "step", "validate_opt_condition",
]
