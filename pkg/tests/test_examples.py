import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, special

from ladderstop import Bernoulli, LogisticReward, PowerReward, RandomStream, TwoSidedExp
from ladderstop import examples as ex
from ladderstop.examples import (
    ExampleSpec,
    american_put_threshold,
    ar1_exp_threshold,
    descending_bank,
    exact_ladder_bank,
    lambert_w,
    logistic_threshold,
    ns_threshold,
    odds_f,
    odds_threshold,
    odds_win_probability,
    shepp_shiryaev_threshold,
)
from ladderstop.models import ProblemError, random_walk
from ladderstop.phi import BankEngine, ExpOvershootEngine, phi_ar1_exp_simplified
from ladderstop.threshold import find_threshold, solve

C_NS = (1 - math.sqrt(0.19)) / 0.9
BANK = exact_ladder_bank(Bernoulli(0.5), 0.9)


@pytest.mark.parametrize("nu,expected", [
    (1.0, 1.6794494717703377),
    (2.0, 1.0 / (C_NS ** -0.5 - 1.0)),
    (1.5, 2.73690),
])
def test_ns_threshold(nu, expected):
    got = ns_threshold(Bernoulli(0.5), 0.9, nu, BANK)
    assert got == pytest.approx(expected, abs=1e-5 if nu == 1.5 else 1e-12)
    # route 2: generic bisection on the same ladder law
    problem = random_walk(Bernoulli(0.5), PowerReward(nu), 0.9)
    res = find_threshold(problem, BankEngine(problem, BANK), tol=1e-12, check=False)
    assert res.alpha_star == pytest.approx(got, abs=1e-9)


def test_ns_nu_two_value():
    assert ns_threshold(Bernoulli(0.5), 0.9, 2.0, BANK) == pytest.approx(3.80077, abs=1e-5)


def test_ns_threshold_on_simulated_bank(ns_problem, ns_bank):
    got = ns_threshold(Bernoulli(0.5), 0.9, 1.0, ns_bank)
    assert got == pytest.approx(1.67945, abs=0.02)


def test_american_put():
    exact = american_put_threshold(Bernoulli(0.5), 0.9, 1.0, exact_ladder_bank(Bernoulli(0.5), 0.9, True))
    assert exact == pytest.approx(math.log((1 - C_NS) / (1 - C_NS / math.e)), abs=1e-13)
    assert exact == pytest.approx(-0.7234894324362123, abs=1e-13)
    sim = american_put_threshold(Bernoulli(0.5), 0.9, 1.0, descending_bank(Bernoulli(0.5), 0.9, 200_000,
                                                                          RandomStream(4)))
    assert sim == pytest.approx(exact, abs=0.01)


def test_logistic_lattice():
    got = logistic_threshold(Bernoulli(0.5), 0.9, 1.0, 1.0, BANK)
    assert got == pytest.approx(-0.36566509530757685, abs=1e-10)
    problem = random_walk(Bernoulli(0.5), LogisticReward(1.0, 1.0), 0.9)
    res = find_threshold(problem, BankEngine(problem, BANK), tol=1e-12)
    assert res.alpha_star == pytest.approx(got, abs=1e-8)


def test_logistic_exp_overshoot_closed_form():
    dist = TwoSidedExp(1.0, minus_rate=1.0)
    got = logistic_threshold(dist, 0.9, 1.0, 1.0)
    assert got == pytest.approx(-0.231099, abs=1e-6)
    problem = random_walk(dist, LogisticReward(1.0, 1.0), 0.9)
    res = find_threshold(problem, ExpOvershootEngine(problem), tol=1e-12, check=False)
    assert res.alpha_star == pytest.approx(got, abs=1e-8)


@pytest.mark.parametrize("p,rho,expected", [(0.18, 0.942, 2), (0.795, 0.435, 1), (0.347, 0.791, 2)])
def test_shepp_shiryaev_table(p, rho, expected):
    assert shepp_shiryaev_threshold(Bernoulli(p), rho) == expected


def test_shepp_shiryaev_rejects_r_at_least_one():
    with pytest.raises(ProblemError):
        shepp_shiryaev_threshold(Bernoulli(0.5), 0.99)


@pytest.mark.parametrize("p,rho", [(0.1, 0.5), (0.05, 0.6)])
def test_shepp_shiryaev_bounded_mode_agrees_with_skip_free(p, rho):
    # ±1 steps have X⁻ ≤ 1; with r < 1/e we get e·E r^τ ≤ e·r < 1, so stopping at once is optimal
    a = shepp_shiryaev_threshold(Bernoulli(p), rho)
    b = shepp_shiryaev_threshold(Bernoulli(p), rho, B=1.0, mode="bounded", reps=50_000, stream=RandomStream(1))
    assert a == 0 and b == 0.0
    with pytest.raises(ProblemError):
        shepp_shiryaev_threshold(Bernoulli(0.5), 0.5, B=1.0, mode="bounded")


# -- Lambert W -------------------------------------------------------------------

@pytest.mark.parametrize("x,w", [(0.0, 0.0), (math.e, 1.0), (-1 / math.e, -1.0), (2 * math.e ** 2, 2.0)])
def test_lambert_w_special_values(x, w):
    assert lambert_w(x) == pytest.approx(w, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.floats(-1 / math.e + 1e-12, 1e300))
def test_lambert_w_residual(x):
    w = lambert_w(x)
    if abs(w) < 700:
        assert abs(w * math.exp(w) - x) <= 1e-12 * (1 + abs(x))
    assert w == pytest.approx(special.lambertw(x).real, rel=1e-13, abs=1e-13)


def test_lambert_w_domain():
    with pytest.raises(ValueError):
        lambert_w(-0.5)


def test_ar1_lambert_threshold_solves_display():
    a = ar1_exp_threshold(0.5, 1.0, 0.9)
    assert a == pytest.approx(2.534475628614869, abs=1e-12)
    root = optimize.brentq(lambda y: y - phi_ar1_exp_simplified(0.5, 1.0, 0.9, PowerReward(1.0), y).value,
                           0.1, 10.0, xtol=1e-14)
    assert a == pytest.approx(root, abs=1e-10)


# -- odds ------------------------------------------------------------------------

def test_odds_uniform_point_two():
    probs = [0.2] * 10
    assert odds_threshold(probs) == 6
    for k in range(1, 11):
        assert odds_f(probs, k) == 1 - Fraction(10 - k, 4)


def _brute_win(probs, k):
    ps = [Fraction(p) for p in probs]
    total = Fraction(0)
    for outcome in itertools.product((0, 1), repeat=len(ps)):
        pr = Fraction(1)
        for p, s in zip(ps, outcome):
            pr *= p if s else 1 - p
        hits = [i + 1 for i, s in enumerate(outcome) if s and i + 1 >= k]
        if len(hits) == 1:
            total += pr
    return total


@pytest.mark.parametrize("probs", [(Fraction(1, 2), Fraction(1, 3), Fraction(1, 4)),
                                   (Fraction(1, 10),) * 5,
                                   (Fraction(9, 10), Fraction(1, 5), Fraction(3, 7), Fraction(1, 2))])
def test_odds_win_probability_by_enumeration(probs):
    for k in range(1, len(probs) + 1):
        assert odds_win_probability(probs, k) == _brute_win(probs, k)


def test_odds_float_inputs_read_as_decimals():
    assert odds_f([0.2, 0.2], 0) == Fraction(1, 2)


# -- registry ---------------------------------------------------------------------

@pytest.mark.parametrize("spec", [
    ExampleSpec("novikov-shiryaev", 0.9, Bernoulli(0.5)),
    ExampleSpec("american-put", 0.9, Bernoulli(0.5)),
    ExampleSpec("logistic", 0.9, Bernoulli(0.5)),
    ExampleSpec("shepp-shiryaev", 0.942, Bernoulli(0.18)),
    ExampleSpec("odds", 1.0, params={"probs": [0.2] * 10}),
], ids=lambda s: s.tag)
def test_closed_form_agrees_with_pipeline(spec):
    closed = ex.closed_form_threshold(spec)
    res = solve(ex.build_problem(spec), reps=200_000, stream=RandomStream(1))
    tol = 4 * res.alpha_stderr if res.alpha_stderr > 0 else 1e-9
    assert abs(res.alpha_star - closed) <= tol + 1e-9


def test_unknown_tag():
    with pytest.raises(ProblemError):
        ExampleSpec("nope", 0.9)
