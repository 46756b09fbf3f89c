import random

import pytest

from stepgame.templates import load_bank

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def bank():
    return load_bank()


@pytest.fixture
def rng():
    return random.Random(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
