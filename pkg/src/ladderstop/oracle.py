"""Brute-force ground truth: value iteration on a truncated uniform grid.

V ← max(g, ρ E[V(next)]) with one-step expectations taken exactly for
discrete increments and by a fixed quadrature rule for continuous ones;
off-grid successors are linearly interpolated.  Outside the grid the chain
is either stopped (``absorb``: V = g there) or clamped to the nearest edge
(``reflect``).  The odds chain is solved exactly by backward induction.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import sparse

from .distributions import IncrementDistribution
from .models import ASCENDING, DESCENDING, ODDS, RANDOM_WALK, SHEPP_SHIRYAEV, ChainModel, ProblemError, StoppingProblem
from .rng import as_stream

STOP_TOL = 1e-9
ABSORB, REFLECT = "absorb", "reflect"


@dataclass(frozen=True)
class Grid:
    lo: float
    hi: float
    h: float

    def __post_init__(self):
        if not (self.h > 0 and self.hi > self.lo):
            raise ValueError("grid needs h > 0 and hi > lo")

    @property
    def n(self) -> int:
        return int(round((self.hi - self.lo) / self.h)) + 1

    def nodes(self) -> np.ndarray:
        return np.round(self.lo + self.h * np.arange(self.n), 12)


@dataclass
class OracleSolution:
    grid: Grid
    y: np.ndarray
    V: np.ndarray
    g: np.ndarray
    continuation: np.ndarray
    iterations: int
    residual: float
    boundary_policy: str
    converged: bool
    margin: tuple[int, int] = (0, 0)

    @property
    def stop(self) -> np.ndarray:
        return self.V <= self.g + STOP_TOL * np.maximum(1.0, np.abs(self.g))

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "V", "g", "stop_flag"])
        for y, v, g, s in zip(self.y, self.V, self.g, self.stop):
            w.writerow([format(y, ".17g"), format(v, ".17g"), format(g, ".17g"), int(s)])


def _quadrature(dist: IncrementDistribution, n: int):
    atoms = dist.atoms()
    if atoms is not None:
        v, w = atoms
        keep = w > 0
        return v[keep], w[keep]
    return dist.quadrature(n)


def _reach(model: ChainModel, nodes: np.ndarray) -> float:
    if model.kind == ODDS:
        return 1.0
    atoms = model.driving_law.atoms()
    if atoms is not None:
        return float(np.max(np.abs(atoms[0][atoms[1] > 0])))
    return 4.0 * model.driving_law.scale()


def default_grid(problem: StoppingProblem, h: float, pilot: float, sigmas: float = 20.0) -> Grid:
    """[b - 20σ, α̂ + 20σ] (ascending) or [α̂ - 20σ, b + 20σ] (descending)."""
    model = problem.model
    if model.kind == ODDS:
        return Grid(-float(model.n), float(model.n), 1.0)
    s = model.driving_law.scale()
    b = problem.b if math.isfinite(problem.b) else pilot
    lo, hi = min(b, pilot) - sigmas * s, max(b, pilot) + sigmas * s
    if model.kind == SHEPP_SHIRYAEV:
        lo = 0.0
    lo = h * math.floor(lo / h)
    hi = lo + h * math.ceil((hi - lo) / h)
    return Grid(lo, hi, h)


def _transition(model: ChainModel, nodes: np.ndarray, grid: Grid, reward, policy: str, quad_n: int):
    """Sparse P and outside-payoff vector c with E V(next) ≈ P V + c."""
    xs, ws = _quadrature(model.driving_law, quad_n)
    n = len(nodes)
    rows, cols, vals = [], [], []
    outside = np.zeros(n)
    idx_all = np.arange(n)
    for x, w in zip(xs, ws):
        z = np.asarray(model.step(nodes, x), dtype=float)
        t = (z - grid.lo) / grid.h
        snapped = np.abs(t - np.rint(t)) < 1e-9
        t = np.where(snapped, np.rint(t), t)
        inside = (t >= 0) & (t <= n - 1)
        if policy == REFLECT:
            t = np.clip(t, 0, n - 1)
            inside = np.ones(n, dtype=bool)
        else:
            out = ~inside
            if out.any():
                outside[out] += w * reward(z[out])
        ti = t[inside]
        j = np.minimum(np.floor(ti).astype(int), n - 2)
        frac = ti - j
        r = idx_all[inside]
        rows += [r, r]
        cols += [j, j + 1]
        vals += [w * (1.0 - frac), w * frac]
    P = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return P, outside


def value_iteration(problem: StoppingProblem, grid: Grid, boundary: str = ABSORB, tol: float = 1e-10,
                    max_iter: int = 200_000, quad_n: int = 64) -> OracleSolution:
    """Fixed-point iteration for sup_τ E_y ρ^τ g(Y_τ) on the grid (Jacobi sweeps)."""
    if boundary not in (ABSORB, REFLECT):
        raise ValueError(f"boundary must be {ABSORB!r} or {REFLECT!r}")
    model = problem.model
    if model.kind == ODDS:
        return _odds_backward(problem)
    rho = problem.discount
    if not rho < 1.0:
        raise ProblemError("value iteration needs rho < 1 (or the odds chain)")
    y = grid.nodes()
    g = np.asarray(problem.reward(y), dtype=float)
    P, c = _transition(model, y, grid, problem.reward, boundary, quad_n)
    V = g.copy()
    stop_at = tol * (1.0 - rho) / rho
    residual, it, converged = math.inf, 0, False
    for it in range(1, max_iter + 1):
        cont = rho * (P @ V + c)
        V_new = np.maximum(g, cont)
        residual = float(np.max(np.abs(V_new - V)))
        V = V_new
        if residual < stop_at:
            converged = True
            break
    cont = rho * (P @ V + c)
    reach = int(math.ceil(_reach(model, y) / grid.h))
    m = min(reach, len(y) // 10)
    lo_margin = 0 if model.kind == SHEPP_SHIRYAEV and grid.lo <= 0.0 else m
    return OracleSolution(grid, y, V, g, cont, it, residual * rho / (1.0 - rho), boundary, converged,
                          (lo_margin, m))


def _odds_backward(problem: StoppingProblem) -> OracleSolution:
    probs = problem.model.probs
    n, rho = len(probs), problem.rho
    grid = Grid(-float(n), float(n), 1.0)
    y = grid.nodes()
    g = np.asarray(problem.reward(y), dtype=float)
    V = g.copy()
    cont = np.zeros_like(g)
    # state ±k sits at index k + n; both continue to index k + 1 of the trials
    for k in range(n - 1, -1, -1):
        p = float(probs[k])
        c = rho * (p * V[n + k + 1] + (1.0 - p) * V[n - k - 1])
        for s in {n + k, n - k}:
            cont[s] = c
            V[s] = max(g[s], c)
    return OracleSolution(grid, y, V, g, cont, n, 0.0, "exact", True, (0, 0))


def extract_boundary(sol: OracleSolution, direction: str = ASCENDING) -> tuple[float, bool]:
    """Edge of the stopping set and whether it is one-sided on the checked nodes.

    Nodes within the truncation margins and nodes where g = 0 are left out.
    """
    n = len(sol.y)
    lo_m, hi_m = sol.margin
    keep = np.zeros(n, dtype=bool)
    keep[lo_m: n - hi_m] = True
    keep &= sol.g > 0
    idx = np.nonzero(keep)[0]
    stop = sol.stop[idx]
    if not stop.any():
        raise ValueError("the stopping set is empty on the checked grid")
    if direction == ASCENDING:
        first = int(np.argmax(stop))
        return float(sol.y[idx[first]]), bool(stop[first:].all())
    if direction != DESCENDING:
        raise ValueError("direction must be ascending or descending")
    last = len(stop) - 1 - int(np.argmax(stop[::-1]))
    return float(sol.y[idx[last]]), bool(stop[: last + 1].all())


# -- the representation identity ---------------------------------------------------------

@dataclass
class RepresentationResult:
    max_deviation: float
    ys: list
    means: list
    stderrs: list
    g: list

    @property
    def deviations(self) -> list:
        return [(m - g) / s if s > 0 else (0.0 if m == g else math.inf)
                for m, g, s in zip(self.means, self.g, self.stderrs)]


def simulate_max_increment(dist: IncrementDistribution, rho: float, reps: int, stream,
                           t_cap: Optional[int] = None) -> np.ndarray:
    """Draws of max_{0≤n≤T} S_n with P(T ≥ n) = ρⁿ, T independent of the walk."""
    if not 0.0 <= rho < 1.0:
        raise ValueError("representation check needs 0 <= rho < 1")
    rng = as_stream(stream).generator()
    if rho == 0.0:
        return np.zeros(reps)
    if t_cap is None:
        t_cap = max(1, math.ceil(math.log(1e-10) / math.log(rho)))
    T = np.minimum(rng.geometric(1.0 - rho, reps) - 1, t_cap)
    s = np.zeros(reps)
    m = np.zeros(reps)
    active = np.nonzero(T > 0)[0]
    step = 0
    while active.size:
        step += 1
        s[active] += dist.sample(rng, active.size)
        m[active] = np.maximum(m[active], s[active])
        active = active[T[active] > step]
    return m


def representation_check(dist: IncrementDistribution, rho: float, g: Callable, f_grid: Sequence[float],
                         f_values: Sequence[float], ys: Sequence[float], reps: int, stream,
                         f_stderr: Optional[Sequence[float]] = None) -> RepresentationResult:
    """Largest |E_y f(M_T) - g(y)| / stderr over ``ys``.

    The same draws of M_T - y serve every y.  When ``f_stderr`` is given the
    uncertainty of the tabulated f is added to the sampling error, treating
    it as fully correlated across the grid.
    """
    fx = np.asarray(f_grid, dtype=float)
    fv = np.asarray(f_values, dtype=float)
    d = simulate_max_increment(dist, rho, reps, stream)
    means, ses, gs = [], [], []
    for y in ys:
        z = y + d
        if z.min() < fx[0] or z.max() > fx[-1]:
            raise ValueError(f"f grid [{fx[0]:g}, {fx[-1]:g}] does not cover sampled maxima "
                             f"[{z.min():g}, {z.max():g}] from y = {y:g}")
        vals = np.interp(z, fx, fv)
        se = vals.std(ddof=1) / math.sqrt(reps)
        if f_stderr is not None:
            se = math.hypot(se, float(np.interp(z, fx, np.asarray(f_stderr)).mean()))
        means.append(float(vals.mean()))
        ses.append(float(se))
        gs.append(float(g(y)))
    res = RepresentationResult(0.0, list(ys), means, ses, gs)
    res.max_deviation = max(abs(x) for x in res.deviations)
    return res
