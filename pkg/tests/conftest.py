import pytest

from ladderstop import Bernoulli, PowerReward, RandomStream
from ladderstop.ladder import ladder_bank_rw
from ladderstop.models import random_walk

_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance_log():
    def record(criterion: int, ok: bool, detail: str) -> None:
        line = f"acceptance criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ns_problem():
    return random_walk(Bernoulli(0.5), PowerReward(1.0), 0.9)


@pytest.fixture(scope="session")
def ns_bank(ns_problem):
    return ladder_bank_rw(ns_problem, 200_000, RandomStream(11))
