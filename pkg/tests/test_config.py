import pytest

from ladderstop import Bernoulli, FinitePMF, TwoSidedExp
from ladderstop.config import (
    ConfigError,
    apply_override,
    build_increment,
    build_problem,
    check_common,
    load_config,
    parse_config,
)


NS_TEXT = """
# comment line
model.kind = random-walk
increment.family = bernoulli
increment.p = 0.5   # trailing comment
reward.kind = power
rho = 0.9
seed = 1
"""


def test_parse_and_build():
    cfg = parse_config(NS_TEXT)
    problem = build_problem(cfg)
    assert problem.model.increment == Bernoulli(0.5)
    assert problem.rho == 0.9 and problem.b == 0.0
    check_common(cfg)


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match=r"run.conf:2: unknown key 'rhoo'"):
        parse_config("seed = 1\nrhoo = 0.9\n", "run.conf")


@pytest.mark.parametrize("text,match", [
    ("seed = 1\nseed = 2\n", "duplicate"),
    ("seed 1\n", "expected 'key = value'"),
])
def test_malformed(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_bad_value_type():
    cfg = parse_config("seed = abc\n", "x.conf")
    with pytest.raises(ConfigError, match="x.conf:1"):
        cfg.get("seed")


def test_seed_required():
    cfg = parse_config("rho = 0.9\n")
    with pytest.raises(ConfigError, match="seed"):
        check_common(cfg)


@pytest.mark.parametrize("key,value", [("tol", "0"), ("oracle.h", "-1"), ("reps", "1")])
def test_positive_settings(key, value):
    cfg = parse_config(f"seed = 1\n{key} = {value}\n")
    with pytest.raises(ConfigError):
        check_common(cfg)


def test_override_replaces_value():
    cfg = parse_config(NS_TEXT)
    apply_override(cfg, "rho=0.8")
    assert cfg.get("rho") == 0.8
    with pytest.raises(ConfigError):
        apply_override(cfg, "rho")
    with pytest.raises(ConfigError):
        apply_override(cfg, "nope=1")


def test_increment_families():
    cfg = parse_config("increment.family = pmf\nincrement.values = -1, 2\nincrement.probs = 2/3, 1/3\n")
    d = build_increment(cfg)
    assert isinstance(d, FinitePMF) and d.mean() == pytest.approx(0.0)
    cfg = parse_config("increment.family = two-sided-exp\nincrement.mu = 2\nincrement.minus_rate = 1\n")
    assert isinstance(build_increment(cfg), TwoSidedExp)
    with pytest.raises(ConfigError, match="unknown increment family"):
        build_increment(parse_config("increment.family = cauchy\n"))
    with pytest.raises(ConfigError, match="invalid increment"):
        build_increment(parse_config("increment.family = bernoulli\nincrement.p = 1.5\n"))


def test_odds_problem():
    cfg = parse_config("model.kind = odds\nmodel.probs = 0.5, 0.25\nreward.kind = odds-product\nrho = 1\n")
    problem = build_problem(cfg)
    assert problem.model.n == 2


def test_invalid_problem_is_config_error():
    cfg = parse_config("model.kind = random-walk\nincrement.family = bernoulli\nincrement.p = 0.5\n"
                       "reward.kind = put\nrho = 0.9\n")
    with pytest.raises(ConfigError):
        build_problem(cfg)


def test_load_config_file(tmp_path):
    path = tmp_path / "ns.conf"
    path.write_text(NS_TEXT)
    cfg = load_config(str(path))
    assert cfg.source == str(path) and cfg.get("seed") == 1
