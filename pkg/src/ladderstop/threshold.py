"""The monotone-case function f, the threshold α* and the checks that certify it.

f(y) = (g(y) - φ(y)) / (1 - E_y ρ^{τ_y}) has the same sign as h(y) = g(y) - φ(y),
so the threshold α* = inf{z > b : φ(z) ≤ g(z)} is located by bisection on h.
Whether stopping at α* itself is optimal (closed boundary) is decided by the
sign of f(α*), and optimality of the threshold rule is certified numerically
by checking that f is non-decreasing above α*.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .ladder import mirror_problem
from .models import (
    AR1,
    ASCENDING,
    DESCENDING,
    ODDS,
    RANDOM_WALK,
    SHEPP_SHIRYAEV,
    OptReport,
    ProblemError,
    StoppingProblem,
    validate_opt_condition,
)
from .phi import AR1ExpEngine, PhiEngine, PhiPoint, make_engine

# sign decisions on closed-form values allow for rounding only
EXACT_TOL = 1e-12
NOISE_SIGMAS = 3.0
NOT_CERTIFIED = "threshold optimality NOT certified by (M1)"

CLOSED, OPEN, UNDETERMINED = "closed", "open", "undetermined"


class ThresholdError(RuntimeError):
    """Base class for threshold search failures."""


class NoCrossingError(ThresholdError):
    """g - φ keeps one sign on the whole expanded bracket."""

    def __init__(self, message: str, status: str):
        super().__init__(message)
        self.status = status


class InconclusiveError(ThresholdError):
    """Monte Carlo noise is too large to locate the threshold."""

    def __init__(self, message: str, recommended_reps: Optional[int]):
        super().__init__(message)
        self.recommended_reps = recommended_reps


@dataclass(frozen=True)
class FValue:
    value: float
    stderr: float

    @property
    def exact(self) -> bool:
        return self.stderr == 0.0


def f_value(g_y: float, phi_y, disc_y, cov: float = 0.0) -> FValue:
    """f = (g - φ)/(1 - E ρ^τ) with a delta-method standard error.

    ``cov`` is the covariance of the φ and discount estimators (non-zero
    when both come from the same ladder sample).
    """
    d = disc_y.value
    if d >= 1.0 - 1e-12:
        raise ProblemError(f"f is undefined: E rho^tau = {d:.15g} is not below 1")
    denom = 1.0 - d
    f = (g_y - phi_y.value) / denom
    a, b = -1.0 / denom, f / denom
    var = a * a * phi_y.stderr ** 2 + b * b * disc_y.stderr ** 2 + 2.0 * a * b * cov
    return FValue(f, math.sqrt(max(var, 0.0)))


def f_at(point: PhiPoint) -> FValue:
    return f_value(point.g, point.phi, point.disc, point.cov)


def classify_boundary(fv: FValue) -> str:
    """Closed [α*, ∞) when f(α*) ≥ 0, open (α*, ∞) when f(α*) < 0.

    Closed-form values use the sign directly (up to rounding); Monte Carlo
    values are open only when f is at least three standard errors below 0.
    """
    if fv.exact:
        return CLOSED if fv.value >= -EXACT_TOL * max(1.0, abs(fv.value)) else OPEN
    if fv.value >= 0.0:
        return CLOSED
    if fv.value <= -NOISE_SIGMAS * fv.stderr:
        return OPEN
    return UNDETERMINED


# -- condition checks ---------------------------------------------------------------

@dataclass
class LogConcavityReport:
    ok: bool
    first_violation: Optional[float] = None
    reason: str = ""


def check_log_concavity(g, grid: Sequence[float], tol: float = 1e-12) -> LogConcavityReport:
    """g increasing and log-concave on the grid, by first and second slope differences."""
    x = np.asarray(grid, dtype=float)
    if x.ndim != 1 or len(x) < 3 or np.any(np.diff(x) <= 0):
        raise ValueError("grid must be strictly increasing with at least 3 points")
    v = np.asarray(g(x), dtype=float)
    if np.any(v <= 0):
        bad = x[np.argmax(v <= 0)]
        raise ValueError(f"g must be positive on the grid; g({bad:g}) = {float(g(bad)):g}")
    dv = np.diff(v)
    scale = np.maximum(1.0, np.abs(v[:-1]))
    dec = np.nonzero(dv < -tol * scale)[0]
    slopes = np.diff(np.log(v)) / np.diff(x)
    curv = np.diff(slopes)
    cvx = np.nonzero(curv > tol * np.maximum(1.0, np.abs(slopes[:-1])))[0]
    first_dec = x[dec[0]] if dec.size else math.inf
    first_cvx = x[cvx[0] + 1] if cvx.size else math.inf
    if first_dec == math.inf and first_cvx == math.inf:
        return LogConcavityReport(True)
    if first_dec <= first_cvx:
        return LogConcavityReport(False, float(first_dec), "g decreases")
    return LogConcavityReport(False, float(first_cvx), "log g is convex")


@dataclass
class M1Report:
    status: str  # "yes" | "no" | "inconclusive"
    grid: list
    f: list
    f_stderr: list
    first_violation: Optional[float] = None
    lemma: dict = field(default_factory=dict)

    @property
    def lemma_holds(self) -> bool:
        return bool(self.lemma) and all(v == "pass" for v in self.lemma.values())


def _nondecreasing(values, ses, exact) -> tuple[bool, Optional[int]]:
    for i in range(len(values) - 1):
        d = values[i + 1] - values[i]
        if exact:
            allowed = EXACT_TOL * max(1.0, abs(values[i]), abs(values[i + 1]))
        else:
            allowed = NOISE_SIGMAS * math.hypot(ses[i], ses[i + 1])
        if d < -allowed:
            return False, i
    return True, None


def check_m1(problem: StoppingProblem, engine: PhiEngine, grid: Sequence[float]) -> M1Report:
    """f non-decreasing on the grid, plus the three sufficient conditions.

    The sufficient conditions are: the discount factor increases in y, φ/g
    decreases and at least one of φ, g increases.
    """
    grid = [float(y) for y in grid]
    if len(grid) < 2:
        return M1Report("inconclusive", grid, [], [])
    pts = engine.evaluate_many(grid)
    fs = [f_at(p) for p in pts]
    exact = all(p.exact for p in pts)
    fv, fse = [f.value for f in fs], [f.stderr for f in fs]
    if not all(math.isfinite(s) for s in fse):
        return M1Report("inconclusive", grid, fv, fse)
    ok, bad = _nondecreasing(fv, fse, exact)

    disc = [p.disc.value for p in pts]
    disc_se = [p.disc.stderr for p in pts]
    ratio = [-(p.phi.value / p.g) for p in pts]
    ratio_se = [p.phi.stderr / p.g for p in pts]
    phis = [p.phi.value for p in pts]
    phi_se = [p.phi.stderr for p in pts]
    gs = [p.g for p in pts]
    lemma = {
        "discount_increasing": "pass" if _nondecreasing(disc, disc_se, exact)[0] else "fail",
        "phi_over_g_decreasing": "pass" if _nondecreasing(ratio, ratio_se, exact)[0] else "fail",
        "phi_or_g_increasing": "pass" if (_nondecreasing(gs, [0.0] * len(gs), True)[0]
                                          or _nondecreasing(phis, phi_se, exact)[0]) else "fail",
    }
    return M1Report("yes" if ok else "no", grid, fv, fse,
                    None if ok else grid[bad + 1], lemma)


# -- the threshold search -----------------------------------------------------------

@dataclass
class ThresholdResult:
    alpha_star: float
    alpha_stderr: float
    boundary: str
    f_at_alpha: FValue
    status: str  # "crossing" | "stop-everywhere"
    engine: str
    direction: str = ASCENDING
    m1: Optional[M1Report] = None
    log_concavity: str = "n-a"  # "yes" | "no" | "n-a"
    opt: Optional[OptReport] = None
    grid: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    evaluations: int = 0

    @property
    def certified(self) -> bool:
        m1_ok = self.m1 is not None and self.m1.status == "yes"
        return m1_ok and self.opt is not None and self.opt.satisfied and self.boundary != UNDETERMINED

    def stopping_set(self) -> str:
        a = format(self.alpha_star, ".10g")
        if self.direction == DESCENDING:
            return f"(-inf, {a}]" if self.boundary == CLOSED else f"(-inf, {a})"
        return f"[{a}, inf)" if self.boundary == CLOSED else f"({a}, inf)"

    def report_lines(self) -> list[str]:
        lines = [
            f"alpha_star: {self.alpha_star:.17g}",
            f"alpha_stderr: {self.alpha_stderr:.17g}",
            f"boundary: {self.boundary}",
            f"stopping_set: {self.stopping_set()}",
            f"f_at_alpha: {self.f_at_alpha.value:.17g}",
            f"f_at_alpha_stderr: {self.f_at_alpha.stderr:.17g}",
            f"status: {self.status}",
            f"engine: {self.engine}",
            f"direction: {self.direction}",
            f"m1: {self.m1.status if self.m1 else 'n-a'}",
        ]
        if self.m1 and self.m1.lemma:
            for k, v in self.m1.lemma.items():
                lines.append(f"m1_lemma_{k}: {v}")
        lines += [
            f"log_concavity: {self.log_concavity}",
            f"opt: {self.opt.status if self.opt else 'n-a'}",
            f"opt_reason: {self.opt.reason if self.opt else ''}",
            f"certified: {'yes' if self.certified else 'no'}",
        ]
        for note in self.notes:
            lines.append(f"note: {note}")
        return lines


def _lower_limit(problem: StoppingProblem, engine: PhiEngine) -> tuple[float, bool]:
    """Smallest admissible start and whether it is itself admissible."""
    kind = problem.model.kind
    if kind == ODDS:
        return 1.0, True
    if kind == SHEPP_SHIRYAEV:
        return max(0.0, problem.b), problem.b < 0.0
    if isinstance(engine, AR1ExpEngine):
        return max(0.0, problem.b), False
    return problem.b, False


def _scale(problem: StoppingProblem) -> float:
    if problem.model.kind == ODDS:
        return 1.0
    return problem.model.increment.scale()


def _integer_scan(problem, engine, lo: int, cap: int):
    k, evals = lo, 0
    hi = problem.model.n if problem.model.kind == ODDS else lo + cap
    last = None
    while k <= hi:
        pt = engine.evaluate(float(k))
        evals += 1
        fv = f_at(pt)
        last = (k, fv)
        if _nonneg(fv):
            return k, fv, evals
        k += 1
    raise NoCrossingError(f"f < 0 at every integer state in [{lo}, {hi}]: continue-everywhere",
                          "continue-everywhere")


def _nonneg(fv: FValue) -> bool:
    if fv.exact:
        return fv.value >= -EXACT_TOL * max(1.0, abs(fv.value))
    return fv.value >= 0.0


def find_threshold(problem: StoppingProblem, engine: PhiEngine, bracket: Optional[tuple] = None,
                   tol: float = 1e-8, max_expand: int = 40, check: bool = True,
                   grid_points: int = 21, grid_span: Optional[float] = None,
                   max_alpha_stderr: Optional[float] = None, integer_cap: int = 2000) -> ThresholdResult:
    """Locate α* = inf{z > b : φ(z) ≤ g(z)} and classify the boundary.

    Continuous state spaces use bisection on h = g - φ until the bracket is
    shorter than ``tol``; integer chains scan upwards from the first state.
    With ``check`` the (M1) grid check runs on [α*, α* + grid_span].
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if problem.direction != ASCENDING:
        raise ProblemError("find_threshold works on ascending problems; use solve() or mirror first")
    floor, inclusive = _lower_limit(problem, engine)
    scale = _scale(problem)
    evals = 0
    notes: list[str] = []
    integer = engine.integer

    if integer:
        lo = math.ceil(floor) if inclusive else math.floor(floor) + 1
        if bracket is not None:
            lo = max(lo, math.ceil(bracket[0]))
        alpha, fv, evals = _integer_scan(problem, engine, int(lo), integer_cap)
        status = "stop-everywhere" if alpha == lo else "crossing"
        alpha, alpha_se, f_alpha = float(alpha), 0.0, fv
        boundary = classify_boundary(fv)
    else:
        alpha, alpha_se, f_alpha, status, boundary, evals = _bisect(
            problem, engine, floor, inclusive, scale, bracket, tol, max_expand, max_alpha_stderr, notes)

    result = ThresholdResult(alpha, alpha_se, boundary, f_alpha, status, engine.name,
                             opt=validate_opt_condition(problem), notes=notes, evaluations=evals)
    if check:
        span = grid_span if grid_span is not None else (5.0 if integer else 5.0 * scale)
        if integer:
            top = alpha + span
            if problem.model.kind == ODDS:
                top = min(top, problem.model.n - 1)
            grid = [float(k) for k in range(int(alpha), int(top) + 1)]
        else:
            grid = list(np.linspace(alpha, alpha + span, grid_points))
        result.grid = grid
        result.m1 = check_m1(problem, engine, grid) if len(grid) >= 2 else M1Report("yes", grid, [], [])
        if problem.model.kind == RANDOM_WALK:
            lc_lo = alpha if not math.isfinite(problem.b) else max(problem.b + 1e-6 * scale, alpha - span)
            lc_grid = np.linspace(lc_lo, alpha + span, max(grid_points, 3))
            try:
                lc = check_log_concavity(problem.reward, lc_grid)
                result.log_concavity = "yes" if lc.ok else "no"
            except ValueError:
                result.log_concavity = "no"
        if result.m1.status != "yes":
            notes.append(NOT_CERTIFIED)
    if result.opt is not None and not result.opt.satisfied:
        notes.append(f"(Opt) {result.opt.status}: {result.opt.reason}")
    return result


def _bisect(problem, engine, floor, inclusive, scale, bracket, tol, max_expand, max_alpha_stderr, notes):
    evals = 0

    def h(y):
        nonlocal evals
        evals += 1
        pt = engine.evaluate(y)
        with np.errstate(over="ignore", invalid="ignore"):
            val = pt.g - pt.phi.value
        if not math.isfinite(val):
            raise NoCrossingError(f"g - phi is not finite at y = {y:g} (g = {pt.g:g}, phi = {pt.phi.value:g}); "
                                  "no threshold found before the values overflow", "continue-everywhere")
        return val, pt

    if bracket is not None:
        lo, hi = float(bracket[0]), float(bracket[1])
        if not lo < hi:
            raise ValueError("bracket must satisfy lo < hi")
    else:
        if math.isfinite(floor):
            lo = floor if inclusive else floor + 1e-9 * max(1.0, abs(floor), scale)
        else:
            lo = -4.0 * scale
        hi = lo + 10.0 * scale
    if math.isfinite(floor):
        lo = max(lo, floor if inclusive else np.nextafter(floor, math.inf))
    lo0 = lo

    h_lo, pt_lo = h(lo)
    width = hi - lo
    k = 0
    while h_lo >= 0:
        if math.isfinite(floor) or k >= max_expand:
            f_lo = f_at(pt_lo)
            notes.append("g >= phi at the lower end: stopping is optimal everywhere above it")
            return lo0, 0.0, f_lo, "stop-everywhere", classify_boundary(f_lo), evals
        new_lo = lo - width * 2.0 ** k
        h_new, pt_new = h(new_lo)
        if h_new < 0:
            hi, lo, h_lo, pt_lo = lo, new_lo, h_new, pt_new
            break
        lo, h_lo, pt_lo = new_lo, h_new, pt_new
        k += 1

    h_hi, pt_hi = h(hi)
    k = 0
    while h_hi < 0:
        if k >= max_expand:
            raise NoCrossingError(f"phi > g on the whole expanded bracket [{lo:g}, {hi:g}]: "
                                  "continue-everywhere (or no threshold on this range)", "continue-everywhere")
        lo, h_lo, pt_lo = hi, h_hi, pt_hi
        hi = hi + width * 2.0 ** k
        h_hi, pt_hi = h(hi)
        k += 1

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        h_mid, pt_mid = h(mid)
        if h_mid >= 0:
            hi, h_hi, pt_hi = mid, h_mid, pt_mid
        else:
            lo, h_lo, pt_lo = mid, h_mid, pt_mid
    alpha = 0.5 * (lo + hi)
    f_lo, f_hi = f_at(pt_lo), f_at(pt_hi)

    # local slope of h for the standard error of α*
    delta = max(1e-3 * scale, 10.0 * tol)
    a_lo = alpha - delta
    if math.isfinite(floor) and a_lo <= floor:
        a_lo = alpha
    hp, _ = h(alpha + delta)
    hm = h(a_lo)[0] if a_lo < alpha else 0.5 * (h_lo + h_hi)
    slope = (hp - hm) / (alpha + delta - a_lo)
    se_h = pt_hi.phi.stderr
    exact = pt_lo.exact and pt_hi.exact
    if exact:
        alpha_se = 0.0
    elif slope > 0:
        alpha_se = se_h / slope
    else:
        raise InconclusiveError(
            f"g - phi is not increasing through the root at {alpha:.6g} beyond Monte Carlo noise",
            engine.recommended_reps(se_h, se_h / 4.0))
    if max_alpha_stderr is not None and alpha_se > max_alpha_stderr:
        raise InconclusiveError(
            f"alpha* = {alpha:.6g} has stderr {alpha_se:.3g} > {max_alpha_stderr:.3g}",
            engine.recommended_reps(alpha_se, max_alpha_stderr))

    # continuous fit: f changes sign across the final bracket without a jump
    fslope = abs(slope) / max(1.0 - pt_hi.disc.value, 1e-300)
    allowed = 2.0 * fslope * (hi - lo) + EXACT_TOL * max(1.0, abs(pt_hi.g))
    if not exact:
        allowed += NOISE_SIGMAS * math.hypot(f_lo.stderr, f_hi.stderr)
    if f_hi.value - f_lo.value <= allowed:
        f_alpha = FValue(0.0, f_hi.stderr)
        notes.append("continuous fit at alpha*: f(alpha*) = 0")
    else:
        f_alpha = f_at(engine.evaluate(alpha))
        notes.append("f jumps at alpha*")
    return alpha, alpha_se, f_alpha, "crossing", classify_boundary(f_alpha), evals


def _mirror_result(res: ThresholdResult) -> ThresholdResult:
    grid = [-y for y in res.grid]
    return replace(res, alpha_star=0.0 - res.alpha_star, direction=DESCENDING, grid=grid,
                   notes=res.notes + ["solved on the mirrored (negated) state"])


def solve(problem: StoppingProblem, engine: str | PhiEngine = "auto", reps: int = 100_000, stream=0,
          tol: float = 1e-8, bracket: Optional[tuple] = None, horizon: Optional[int] = None,
          workers: int = 1, **kwargs) -> ThresholdResult:
    """End to end: mirror if descending, build an engine, find and check α*."""
    target = mirror_problem(problem) if problem.direction == DESCENDING else problem
    if isinstance(engine, PhiEngine):
        eng = engine
    else:
        eng = make_engine(target, engine, reps=reps, stream=stream, horizon=horizon, workers=workers)
    if bracket is not None and problem.direction == DESCENDING:
        bracket = (-bracket[1], -bracket[0])
    res = find_threshold(target, eng, bracket=bracket, tol=tol, **kwargs)
    return _mirror_result(res) if problem.direction == DESCENDING else res
