import io
import math

import numpy as np
import pytest

from ladderstop import Bernoulli, ExponentialReward, Gaussian, PowerReward, PutReward, RandomStream
from ladderstop.distributions import degenerate
from ladderstop.examples import odds_threshold, odds_win_probability
from ladderstop.models import DESCENDING, ODDS, SHEPP_SHIRYAEV, ChainModel, ProblemError, StoppingProblem, random_walk
from ladderstop.oracle import (
    Grid,
    default_grid,
    extract_boundary,
    representation_check,
    simulate_max_increment,
    value_iteration,
)
from ladderstop.rewards import OddsReward
from ladderstop.threshold import solve

C_NS = (1 - math.sqrt(0.19)) / 0.9
ALPHA_NS = C_NS / (1 - C_NS)


def test_grid_nodes():
    g = Grid(-1.0, 1.0, 0.1)
    assert g.n == 21
    assert g.nodes()[17] == 0.7
    with pytest.raises(ValueError):
        Grid(1.0, 0.0, 0.1)


@pytest.fixture(scope="module")
def ns_oracle():
    problem = random_walk(Bernoulli(0.5), PowerReward(1.0), 0.9)
    return problem, value_iteration(problem, default_grid(problem, 0.01, ALPHA_NS))


def test_ns_oracle_boundary(ns_oracle):
    _, sol = ns_oracle
    edge, one_sided = extract_boundary(sol)
    assert sol.converged and one_sided
    assert edge == pytest.approx(math.ceil(ALPHA_NS / 0.01) * 0.01, abs=1e-12)


def test_ns_oracle_dominates_reward(ns_oracle):
    _, sol = ns_oracle
    assert np.all(sol.V >= sol.g - 1e-12)
    # away from the truncation margins V is g itself wherever the oracle stops
    inner = slice(sol.margin[0], len(sol.y) - sol.margin[1])
    stop = sol.stop[inner]
    assert np.all(sol.V[inner][stop] == sol.g[inner][stop])


def test_reflect_policy_gives_same_boundary():
    problem = random_walk(Bernoulli(0.5), PowerReward(1.0), 0.9)
    sol = value_iteration(problem, Grid(-10.0, 20.0, 0.05), boundary="reflect")
    assert extract_boundary(sol)[0] == pytest.approx(1.7, abs=1e-9)
    with pytest.raises(ValueError):
        value_iteration(problem, Grid(-1.0, 1.0, 0.5), boundary="wrap")


def test_put_oracle_descending():
    problem = random_walk(Bernoulli(0.5), PutReward(1.0), 0.9, DESCENDING)
    sol = value_iteration(problem, default_grid(problem, 0.01, -0.72))
    edge, one_sided = extract_boundary(sol, DESCENDING)
    assert one_sided and edge == pytest.approx(-0.73, abs=1e-9)


def test_gaussian_walk_against_pipeline():
    problem = random_walk(Gaussian(0.0, 1.0), PowerReward(1.0), 0.9)
    res = solve(problem, reps=200_000, stream=RandomStream(3))
    h = 0.02
    sol = value_iteration(problem, default_grid(problem, h, res.alpha_star, sigmas=12))
    edge, one_sided = extract_boundary(sol)
    assert one_sided
    # interpolation adds an O(h) bias on top of the grid cell
    assert abs(edge - res.alpha_star) <= 2 * h + 3 * res.alpha_stderr


def test_odds_backward_induction():
    probs = (0.2,) * 10
    problem = StoppingProblem(ChainModel(ODDS, probs=probs), OddsReward(probs), 1.0)
    sol = value_iteration(problem, Grid(-10, 10, 1))
    k = odds_threshold(probs)
    assert sol.V[10] == pytest.approx(float(odds_win_probability(probs, k)), rel=1e-12)
    assert sol.V[10] == pytest.approx(0.4096, rel=1e-12)
    assert extract_boundary(sol)[0] == k


def test_shepp_shiryaev_oracle_grid_starts_at_zero():
    problem = StoppingProblem(ChainModel(SHEPP_SHIRYAEV, Bernoulli(0.18)), ExponentialReward(), 0.942)
    grid = default_grid(problem, 1.0, 2.0)
    assert grid.lo == 0.0
    sol = value_iteration(problem, grid)
    assert extract_boundary(sol)[0] == 2.0


def test_value_iteration_needs_discount():
    problem = random_walk(Bernoulli(0.5), PowerReward(1.0), 1.0)
    with pytest.raises(ProblemError):
        value_iteration(problem, Grid(0.0, 1.0, 0.5))


def test_csv(ns_oracle):
    _, sol = ns_oracle
    buf = io.StringIO()
    sol.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "y,V,g,stop_flag" and len(lines) == len(sol.y) + 1


def test_max_increment_horizon_law():
    # with unit up-steps M_T = T and P(T ≥ n) = ρⁿ, so E T = ρ/(1-ρ)
    m = simulate_max_increment(degenerate(1.0), 0.75, 200_000, RandomStream(1))
    assert m.mean() == pytest.approx(3.0, abs=0.03)
    assert (m >= 2).mean() == pytest.approx(0.75 ** 2, abs=0.005)


def test_representation_detects_wrong_f():
    grid = np.arange(-1.0, 400.0)
    f_true = (grid - C_NS * (grid + 1)) / (1 - C_NS)
    ok = representation_check(Bernoulli(0.5), 0.9, PowerReward(1.0), grid, f_true, [2.0, 3.0], 200_000,
                              RandomStream(2))
    bad = representation_check(Bernoulli(0.5), 0.9, PowerReward(1.0), grid, f_true + 0.05, [2.0, 3.0], 200_000,
                               RandomStream(2))
    assert ok.max_deviation < 4
    assert bad.max_deviation > 10


def test_representation_grid_must_cover():
    with pytest.raises(ValueError):
        representation_check(Bernoulli(0.5), 0.9, PowerReward(1.0), [2.0, 3.0], [0.0, 1.0], [2.0], 1000, 0)
