import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ladderstop import Bernoulli, ExponentialReward, LogisticReward, PowerReward, PutReward, RandomStream, TwoSidedExp
from ladderstop.examples import exact_ladder_bank, odds_threshold
from ladderstop.ladder import bernoulli_ascent_transform, mirror_problem
from ladderstop.models import AR1, DESCENDING, ODDS, ChainModel, ProblemError, StoppingProblem, random_walk
from ladderstop.phi import BankEngine, PhiEstimate, PhiPoint, make_engine
from ladderstop.rewards import OddsReward
from ladderstop.threshold import (
    CLOSED,
    NOT_CERTIFIED,
    OPEN,
    UNDETERMINED,
    FValue,
    InconclusiveError,
    NoCrossingError,
    check_log_concavity,
    check_m1,
    classify_boundary,
    f_at,
    f_value,
    find_threshold,
    solve,
)

C_NS = (1 - math.sqrt(0.19)) / 0.9


def _est(v, se=0.0):
    return PhiEstimate(v, se, 0, 0.0, "t")


def test_f_value_exact():
    fv = f_value(2.0, _est(1.5), _est(0.5))
    assert fv.value == pytest.approx(1.0) and fv.exact


def test_f_value_delta_method():
    # only φ noisy: se(f) = se(φ)/(1-d)
    fv = f_value(2.0, _est(1.5, 0.01), _est(0.5))
    assert fv.stderr == pytest.approx(0.02)
    with pytest.raises(ProblemError):
        f_value(1.0, _est(0.5), _est(1.0))


@pytest.mark.parametrize("fv,expected", [
    (FValue(0.0, 0.0), CLOSED),
    (FValue(-1e-14, 0.0), CLOSED),
    (FValue(-1e-6, 0.0), OPEN),
    (FValue(0.01, 0.1), CLOSED),
    (FValue(-0.01, 0.1), UNDETERMINED),
    (FValue(-0.5, 0.1), OPEN),
])
def test_classify_boundary(fv, expected):
    assert classify_boundary(fv) == expected


def test_log_concavity():
    grid = np.linspace(0.1, 5, 50)
    assert check_log_concavity(lambda y: y, grid).ok
    assert check_log_concavity(LogisticReward(1.0, 1.0), np.linspace(-5, 5, 50)).ok
    bad = check_log_concavity(lambda y: np.exp(y ** 2), grid)
    assert not bad.ok and bad.reason == "log g is convex"
    dec = check_log_concavity(lambda y: 1.0 / y, grid)
    assert not dec.ok and dec.reason == "g decreases"
    with pytest.raises(ValueError):
        check_log_concavity(lambda y: y, np.linspace(-1, 1, 5))


def test_ns_exact_threshold(ns_problem):
    engine = BankEngine(ns_problem, exact_ladder_bank(Bernoulli(0.5), 0.9))
    res = find_threshold(ns_problem, engine, tol=1e-12)
    assert res.alpha_star == pytest.approx(C_NS / (1 - C_NS), abs=1e-10)
    assert res.boundary == CLOSED and res.certified and res.alpha_stderr == 0.0
    assert res.stopping_set().startswith("[1.679449")
    assert res.log_concavity == "yes"


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.3, 0.99))
def test_ns_threshold_formula_all_walks(p, rho):
    dist = Bernoulli(p)
    problem = random_walk(dist, PowerReward(1.0), rho)
    res = find_threshold(problem, BankEngine(problem, exact_ladder_bank(dist, rho)), tol=1e-12, check=False)
    c = bernoulli_ascent_transform(p, rho)
    assert res.alpha_star == pytest.approx(c / (1 - c), rel=1e-9, abs=1e-9)


def test_ns_monte_carlo_threshold(ns_problem, ns_bank):
    res = find_threshold(ns_problem, BankEngine(ns_problem, ns_bank))
    assert abs(res.alpha_star - C_NS / (1 - C_NS)) < 4 * res.alpha_stderr
    assert res.alpha_stderr > 0 and res.m1.status == "yes"


def test_put_threshold_mirrored():
    put = random_walk(Bernoulli(0.5), PutReward(1.0), 0.9, DESCENDING)
    engine = BankEngine(mirror_problem(put), exact_ladder_bank(Bernoulli(0.5), 0.9))
    res = solve(put, engine=engine, tol=1e-12)
    expected = math.log((1 - C_NS) / (1 - C_NS / math.e))
    assert res.alpha_star == pytest.approx(expected, abs=1e-9)
    assert res.direction == DESCENDING and res.stopping_set().startswith("(-inf, -0.72348")


def test_ar1_threshold():
    problem = StoppingProblem(ChainModel(AR1, TwoSidedExp(1.0), lam=0.5), PowerReward(1.0), 0.9)
    res = solve(problem, tol=1e-11)
    assert res.alpha_star == pytest.approx(2.2446869700, abs=1e-8)
    assert res.certified
    # E ρ^τ_y decreases in y here, so the lemma's first condition fails although f is monotone
    assert res.m1.lemma["discount_increasing"] == "fail"


def test_odds_threshold_scan():
    probs = (0.2,) * 10
    problem = StoppingProblem(ChainModel(ODDS, probs=probs), OddsReward(probs), 1.0)
    res = solve(problem)
    assert res.alpha_star == 6 == odds_threshold(probs)
    assert res.boundary == CLOSED and res.certified


def test_stop_everywhere():
    problem = random_walk(Bernoulli(0.3), LogisticReward(1.0, 1.0), 0.9)
    res = solve(problem, engine=BankEngine(problem, exact_ladder_bank(Bernoulli(0.3), 0.9)))
    assert res.status == "stop-everywhere"


def test_continue_everywhere():
    # ρ E e^X > 1: φ/g = c e > 1 at every y
    problem = random_walk(Bernoulli(0.5), ExponentialReward(), 0.9)
    with pytest.raises(NoCrossingError) as err:
        find_threshold(problem, BankEngine(problem, exact_ladder_bank(Bernoulli(0.5), 0.9)), max_expand=8)
    assert err.value.status == "continue-everywhere"


def test_inconclusive_with_few_reps(ns_problem):
    engine = make_engine(ns_problem, reps=2000, stream=RandomStream(0))
    with pytest.raises(InconclusiveError) as err:
        find_threshold(ns_problem, engine, max_alpha_stderr=1e-4)
    assert err.value.recommended_reps > 2000


def test_m1_violation_is_reported():
    # a reward that flattens out after a ramp breaks monotonicity of f
    from ladderstop.rewards import TableReward
    g = TableReward((0.0, 1.0, 2.0, 3.0, 50.0), (0.0, 1.0, 3.0, 3.2, 3.3))
    problem = random_walk(Bernoulli(0.5), g, 0.9)
    engine = BankEngine(problem, exact_ladder_bank(Bernoulli(0.5), 0.9))
    rep = check_m1(problem, engine, np.linspace(0.5, 3.0, 11))
    assert rep.status == "no" and rep.first_violation is not None
    res = find_threshold(problem, engine, grid_span=3.0)
    if res.m1.status != "yes":
        assert NOT_CERTIFIED in res.notes and not res.certified


def test_report_lines_keys(ns_problem):
    res = find_threshold(ns_problem, BankEngine(ns_problem, exact_ladder_bank(Bernoulli(0.5), 0.9)))
    keys = [ln.split(":")[0] for ln in res.report_lines()]
    for k in ("alpha_star", "alpha_stderr", "boundary", "m1", "opt", "certified"):
        assert k in keys


def test_f_at_point():
    pt = PhiPoint(1.0, 1.0, _est(0.5), _est(0.5))
    assert f_at(pt).value == pytest.approx(1.0)
