import numpy as np
import pytest

from qjump import ICKind, InitialCondition, ModelParams


@pytest.fixture
def left():
    return InitialCondition(ICKind.LEFT_LOCALIZED)


@pytest.fixture
def mixture():
    return InitialCondition(ICKind.EQUAL_MIXTURE)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def params(omega0=1.0, d1=16.0, epsilon=0.0):
    return ModelParams(omega0=omega0, epsilon=epsilon, d1=d1)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
