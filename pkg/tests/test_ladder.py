import math

import numpy as np
import pytest

from ladderstop import Bernoulli, ConstantReward, FinitePMF, Gaussian, PowerReward, PutReward, RandomStream
from ladderstop.ladder import (
    LadderBank,
    bernoulli_ascent_transform,
    default_horizon,
    descending_mirror,
    ladder_bank_rw,
    mirror_problem,
    simulate_ladder_batch,
    simulate_ladder_epoch_rw,
    simulate_tau_y,
)
from ladderstop.models import DESCENDING, ODDS, ChainModel, ProblemError, StoppingProblem, random_walk
from ladderstop.rewards import OddsReward

C_NS = (1 - math.sqrt(0.19)) / 0.9


def test_bernoulli_transform_value():
    assert bernoulli_ascent_transform(0.5, 0.9) == pytest.approx(C_NS, rel=1e-15)
    assert bernoulli_ascent_transform(1.0, 0.7) == 0.7


@pytest.mark.parametrize("p,rho", [(0.5, 0.9), (0.3, 0.8), (0.7, 0.95)])
def test_bank_discount_matches_generating_function(p, rho):
    problem = random_walk(Bernoulli(p), ConstantReward(1.0), rho)
    bank = ladder_bank_rw(problem, 100_000, RandomStream(5))
    w = bank.weight
    se = w.std(ddof=1) / math.sqrt(len(w))
    assert abs(w.mean() - bernoulli_ascent_transform(p, rho)) < 4 * se
    # ±1 steps overshoot by exactly one
    assert np.all(bank.overshoot[bank.epoch > 0] == 1.0)


def test_tau_y_sample(ns_problem):
    rng = np.random.default_rng(3)
    s = simulate_tau_y(random_walk(Bernoulli(0.5), ConstantReward(1.0), 0.9), 2.0, 500, rng)
    assert s.epoch is None or (s.epoch >= 1 and s.end_state == 3.0 and s.weight == pytest.approx(0.9 ** s.epoch))
    with pytest.raises(ProblemError):
        simulate_tau_y(ns_problem, -1.0, 10, rng)


def test_epoch_rw_needs_upward_mass():
    with pytest.raises(ProblemError):
        simulate_ladder_epoch_rw(Bernoulli(0.0), 0.9, 10, np.random.default_rng(0))
    s = simulate_ladder_epoch_rw(Gaussian(0.0, 1.0), 0.9, 1000, np.random.default_rng(0))
    assert s.end_state > 0 and s.weight == pytest.approx(0.9 ** s.epoch)


def test_bank_reproducible_across_workers(ns_problem):
    a = ladder_bank_rw(ns_problem, 150_000, RandomStream(9), workers=1)
    b = ladder_bank_rw(ns_problem, 150_000, RandomStream(9), workers=4)
    c = ladder_bank_rw(ns_problem, 150_000, RandomStream(10), workers=1)
    assert a.to_csv() == b.to_csv()
    assert not np.array_equal(a.epoch, c.epoch)


def test_crn_batches_are_translates():
    dist = FinitePMF((-1.0, 0.5, 2.0), (0.5, 0.3, 0.2))
    problem = random_walk(dist, ConstantReward(1.0), 0.85)
    a = simulate_ladder_batch(problem, 0.0, 2000, RandomStream(4), horizon=200)
    b = simulate_ladder_batch(problem, 7.5, 2000, RandomStream(4), horizon=200)
    np.testing.assert_array_equal(a.epoch, b.epoch)
    np.testing.assert_allclose(a.overshoot, b.overshoot, atol=1e-12)


def test_truncation_is_flagged():
    problem = random_walk(Bernoulli(0.2), ConstantReward(1.0), 0.99)
    bank = simulate_ladder_batch(problem, 0.0, 5000, RandomStream(1), horizon=3)
    assert bank.truncated.any()
    assert bank.truncated_fraction == pytest.approx(bank.truncated.mean())
    assert np.all(bank.weight[bank.truncated] == 0.0)


def test_odds_chain_can_fail_to_ascend():
    probs = (0.2, 0.2, 0.2)
    problem = StoppingProblem(ChainModel(ODDS, probs=probs), OddsReward(probs), 1.0)
    bank = simulate_ladder_batch(problem, 1.0, 20_000, RandomStream(2))
    never = bank.epoch == 0
    # no success at trials 2 and 3
    assert never.mean() == pytest.approx(0.64, abs=0.02)
    assert not bank.truncated.any()
    samples = bank.samples()
    assert any(s.infinite for s in samples)


def test_csv_layout():
    probs = (0.5, 0.5)
    problem = StoppingProblem(ChainModel(ODDS, probs=probs), OddsReward(probs), 1.0)
    bank = simulate_ladder_batch(problem, 1.0, 50, RandomStream(0))
    lines = bank.to_csv().splitlines()
    assert lines[0] == "replicate,epoch,end_state,weight,truncated"
    assert len(lines) == 51
    assert any(",inf,,0.0,false" in ln for ln in lines[1:])


def test_from_atoms_is_exact():
    bank = LadderBank.from_atoms([1.0], [C_NS], 0.9)
    assert bank.exact and len(bank) == 1 and bank.mass[0] == C_NS


def test_default_horizon():
    h = default_horizon(0.9, 1.0, 1e-10)
    assert 0.9 ** h < 1e-10 <= 0.9 ** (h - 1)
    with pytest.raises(ProblemError):
        default_horizon(1.0)


def test_mirror_roundtrip():
    put = random_walk(Bernoulli(0.3), PutReward(1.0), 0.9, DESCENDING)
    m = descending_mirror(put)
    assert m.direction == "ascending" and m.b == 0.0
    assert m.model.increment.p == pytest.approx(0.7)
    assert float(m.reward(0.5)) == pytest.approx(float(put.reward(-0.5)))
    back = mirror_problem(m)
    assert back.direction == DESCENDING and float(back.reward(-0.5)) == pytest.approx(float(put.reward(-0.5)))
    with pytest.raises(ProblemError):
        descending_mirror(m)


def test_bank_rejects_descending():
    with pytest.raises(ProblemError):
        ladder_bank_rw(random_walk(Bernoulli(0.5), PutReward(1.0), 0.9, DESCENDING), 10, 0)
