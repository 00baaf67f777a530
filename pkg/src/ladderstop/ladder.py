"""Ladder epochs: first strict ascent (or descent) above the starting level.

For a start y the ladder epoch is τ_y = inf{n > 0 : Y_n > y} (ascending) or
inf{n > 0 : Y_n < y} (descending).  Simulation is vectorised over blocks of
replications; each block draws from its own child stream so results do not
depend on worker count.

Random walks are simulated through the partial sums S_n with the crossing
test S_n > 0.  This makes τ_y exactly independent of y: the same stream
yields the same epochs at every start, and end states differ only by the
shift.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .distributions import IncrementDistribution
from .models import (
    ASCENDING,
    DESCENDING,
    ODDS,
    RANDOM_WALK,
    ChainModel,
    ProblemError,
    StoppingProblem,
)
from .rewards import mirror
from .rng import RandomStream, as_stream, blocks

DEFAULT_TRUNCATION_TOL = 1e-10


@dataclass(frozen=True)
class LadderSample:
    """One ladder epoch.  ``epoch`` is None when no crossing was observed."""

    epoch: Optional[int]
    end_state: float
    weight: float
    truncated: bool = False

    @property
    def infinite(self) -> bool:
        return self.epoch is None and not self.truncated


@dataclass
class LadderBank:
    """Parallel arrays of ladder samples started from a common level.

    ``mass`` holds the probability carried by each entry: 1/N for simulated
    banks, the atom probabilities for an exact ladder law.  ``epoch`` is 0
    where no crossing happened (weight 0 in that case).
    """

    start: float
    epoch: np.ndarray
    end: np.ndarray
    weight: np.ndarray
    truncated: np.ndarray
    mass: np.ndarray
    horizon: int
    discount: float
    exact: bool = False

    def __len__(self) -> int:
        return len(self.weight)

    @property
    def overshoot(self) -> np.ndarray:
        return self.end - self.start

    @property
    def truncated_fraction(self) -> float:
        return float(self.mass[self.truncated].sum())

    def samples(self) -> list[LadderSample]:
        out = []
        for e, z, w, t in zip(self.epoch, self.end, self.weight, self.truncated):
            out.append(LadderSample(int(e) if e > 0 else None, float(z), float(w), bool(t)))
        return out

    @classmethod
    def from_atoms(cls, overshoots, weights, discount: float) -> "LadderBank":
        """Exact ladder law given as atoms of the defective measure E[rho^τ; S_τ ∈ dx].

        ``weights[i]`` is E[rho^τ; S_τ = overshoots[i]].
        """
        s = np.asarray(overshoots, dtype=float)
        w = np.asarray(weights, dtype=float)
        n = len(s)
        return cls(0.0, np.ones(n, dtype=np.int64), s.copy(), np.ones(n), np.zeros(n, dtype=bool),
                   w.copy(), 0, discount, exact=True)

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["replicate", "epoch", "end_state", "weight", "truncated"])
        for i, (e, z, w, t) in enumerate(zip(self.epoch, self.end, self.weight, self.truncated)):
            if e > 0:
                writer.writerow([i, int(e), repr(float(z)), repr(float(w)), "false"])
            else:
                writer.writerow([i, "" if t else "inf", "", "0.0", "true" if t else "false"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def bernoulli_ascent_transform(p: float, rho: float) -> float:
    """E rho^{τ₊} for the ±1 walk with up-probability p (first-passage generating function)."""
    q = 1.0 - p
    if q == 0.0:
        return rho
    return (1.0 - math.sqrt(1.0 - 4.0 * p * q * rho * rho)) / (2.0 * q * rho)


def default_horizon(discount: float, sup_g: float = 1.0, tol: float = DEFAULT_TRUNCATION_TOL) -> int:
    """Smallest H with discount^H * sup_g < tol."""
    if discount >= 1.0:
        raise ProblemError("a truncation horizon needs discount < 1")
    sup_g = max(sup_g, 1e-300)
    if sup_g < tol:
        return 1
    return max(1, math.ceil(math.log(tol / sup_g) / math.log(discount)))


def _check_start(problem: StoppingProblem, y: float) -> None:
    b = problem.b
    if problem.model.kind == ODDS:
        # every band state is a legitimate start; g vanishes at k <= 0
        b = -math.inf
    if problem.direction == ASCENDING and not y > b:
        raise ProblemError(f"start y = {y} must lie above b = {b} for an ascending problem")
    if problem.direction == DESCENDING and not y < b:
        raise ProblemError(f"start y = {y} must lie below b = {b} for a descending problem")
    if not problem.model.contains(y):
        raise ProblemError(f"start y = {y} is outside the state space {problem.model.state_space}")


class _LadderRun:
    """Resumable simulation of one block of ladder epochs."""

    def __init__(self, model: ChainModel, y: float, n: int, rng: np.random.Generator,
                 discount: float, ascending: bool, crn: bool):
        self.model, self.y, self.n, self.rng = model, float(y), n, rng
        self.discount, self.ascending, self.crn = discount, ascending, crn
        self.walk = model.kind == RANDOM_WALK
        # random walks track S_n and test S_n > 0
        self.state = np.full(n, 0.0 if self.walk else self.y)
        self.level = 0.0 if self.walk else self.y
        self.epoch = np.zeros(n, dtype=np.int64)
        self.end = np.full(n, np.nan)
        self.infinite = np.zeros(n, dtype=bool)
        self.active = np.arange(n)
        self.t = 0

    def advance(self, horizon: int) -> None:
        model = self.model
        while self.t < horizon and self.active.size:
            self.t += 1
            if self.crn:
                x = model.draw(self.rng, self.n)[self.active]
            else:
                x = model.draw(self.rng, self.active.size)
            new = model.step(self.state[self.active], x)
            self.state[self.active] = new
            crossed = new > self.level if self.ascending else new < self.level
            hit = self.active[crossed]
            self.epoch[hit] = self.t
            self.end[hit] = new[crossed] + self.y if self.walk else new[crossed]
            if model.kind == ODDS:
                never = model.certified_never_exceeds(new, self.level) & ~crossed
                self.infinite[self.active[never]] = True
                crossed = crossed | never
            self.active = self.active[~crossed]

    def weights(self) -> np.ndarray:
        w = np.zeros(self.n)
        hit = self.epoch > 0
        w[hit] = self.discount ** self.epoch[hit].astype(float)
        return w

    def truncated(self) -> np.ndarray:
        return (self.epoch == 0) & ~self.infinite


def _simulate(problem: StoppingProblem, y: float, reps: int, stream: RandomStream,
              horizon: Optional[int], crn: bool, workers: int,
              payoff: Optional[Callable] = None, max_horizon: Optional[int] = None) -> LadderBank:
    problem.require_simulable()
    model, discount = problem.model, problem.discount
    ascending = problem.direction == ASCENDING
    if model.kind == ODDS:
        # the odds chain is absorbed after at most n steps
        horizon = model.n if horizon is None else horizon
    runs = [_LadderRun(model, y, hi - lo, stream.child(j).generator(), discount, ascending, crn)
            for j, (lo, hi) in enumerate(blocks(reps))]

    def advance_all(h):
        if workers > 1 and len(runs) > 1:
            with ThreadPoolExecutor(workers) as pool:
                list(pool.map(lambda run: run.advance(h), runs))
        else:
            for run in runs:
                run.advance(h)

    sup_g = problem.reward.sup
    if horizon is not None:
        advance_all(horizon)
        final = horizon
    elif math.isfinite(sup_g):
        final = default_horizon(discount, sup_g)
        advance_all(final)
    else:
        # unbounded reward: double the horizon until the estimate settles
        payoff = payoff or problem.reward
        final = default_horizon(discount, 1.0)
        cap = max_horizon or 64 * final
        advance_all(final)
        prev = _payoff_mean(runs, payoff)
        while final < cap and any(run.active.size for run in runs):
            final *= 2
            advance_all(final)
            cur = _payoff_mean(runs, payoff)
            if abs(cur[0] - prev[0]) < 0.1 * max(cur[1], 1e-300):
                break
            prev = cur

    epoch = np.concatenate([r.epoch for r in runs])
    end = np.concatenate([r.end for r in runs])
    weight = np.concatenate([r.weights() for r in runs])
    truncated = np.concatenate([r.truncated() for r in runs])
    start = 0.0 if model.kind == RANDOM_WALK and y == 0.0 else float(y)
    return LadderBank(start, epoch, end, weight, truncated, np.full(reps, 1.0 / reps), final, discount)


def _payoff_mean(runs, payoff) -> tuple[float, float]:
    vals = []
    for run in runs:
        w = run.weights()
        v = np.zeros(run.n)
        hit = run.epoch > 0
        v[hit] = w[hit] * payoff(run.end[hit])
        vals.append(v)
    v = np.concatenate(vals)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0


def simulate_tau_y(problem: StoppingProblem, y: float, horizon: int,
                   rng: np.random.Generator) -> LadderSample:
    """Run the chain from y until the first strict crossing of y, or the horizon."""
    _check_start(problem, y)
    problem.require_simulable()
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    run = _LadderRun(problem.model, y, 1, rng, problem.discount,
                     problem.direction == ASCENDING, crn=False)
    run.advance(horizon)
    if run.epoch[0] > 0:
        return LadderSample(int(run.epoch[0]), float(run.end[0]), float(run.weights()[0]))
    return LadderSample(None, math.nan, 0.0, truncated=not bool(run.infinite[0]))


def simulate_ladder_epoch_rw(dist: IncrementDistribution, rho: float, horizon: int,
                             rng: np.random.Generator) -> LadderSample:
    """Sample (τ₊, S_{τ₊}) for the walk started at 0."""
    _require_ascends(dist)
    model = ChainModel(RANDOM_WALK, dist)
    if rho >= 1.0:
        raise ProblemError("random-walk ladder epochs need rho < 1")
    run = _LadderRun(model, 0.0, 1, rng, rho, True, crn=False)
    run.advance(horizon)
    if run.epoch[0] > 0:
        return LadderSample(int(run.epoch[0]), float(run.end[0]), float(run.weights()[0]))
    return LadderSample(None, math.nan, 0.0, truncated=True)


def _require_ascends(dist: IncrementDistribution) -> None:
    if not dist.prob_positive() > 0:
        raise ProblemError("P(X1 > 0) = 0: the walk never ascends")


def simulate_ladder_batch(problem: StoppingProblem, y: float, reps: int, stream,
                          horizon: Optional[int] = None, crn: bool = True,
                          workers: int = 1) -> LadderBank:
    """Ladder samples for ``reps`` independent chains started at y.

    With ``crn=True`` every replication consumes one innovation per step
    whether or not it is still running, so replication i sees the same
    innovation sequence for every start y (common random numbers).
    """
    _check_start(problem, y)
    if reps < 1:
        raise ValueError("reps must be positive")
    return _simulate(problem, y, reps, as_stream(stream), horizon, crn, workers)


def ladder_bank_rw(problem: StoppingProblem, reps: int, stream, horizon: Optional[int] = None,
                   workers: int = 1, y_ref: Optional[float] = None) -> LadderBank:
    """Shared bank of (τ₊, S_{τ₊}) draws for an ascending random-walk problem.

    For unbounded rewards the horizon is chosen adaptively using the payoff
    at ``y_ref`` (default: one scale unit above the positivity boundary).
    """
    if problem.model.kind != RANDOM_WALK:
        raise ProblemError("ladder banks are only translation invariant for random walks")
    if problem.direction != ASCENDING:
        raise ProblemError("mirror a descending problem before building a bank")
    _require_ascends(problem.model.increment)
    if y_ref is None:
        base = problem.b if math.isfinite(problem.b) else 0.0
        y_ref = base + problem.model.increment.scale()
    reward = problem.reward
    return _simulate(problem, 0.0, reps, as_stream(stream), horizon, crn=False, workers=workers,
                     payoff=lambda s: reward(y_ref + s))


def mirror_problem(problem: StoppingProblem) -> StoppingProblem:
    """Negate the state: ascending <-> descending."""
    flipped = DESCENDING if problem.direction == ASCENDING else ASCENDING
    return replace(problem, model=problem.model.negate(), reward=mirror(problem.reward),
                   direction=flipped, boundary_b=0.0 - problem.b)


def descending_mirror(problem: StoppingProblem) -> StoppingProblem:
    """The ascending problem in the negated state z = -y."""
    if problem.direction != DESCENDING:
        raise ProblemError("descending_mirror expects a descending problem")
    return mirror_problem(problem)
