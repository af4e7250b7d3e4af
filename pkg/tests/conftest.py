import numpy as np
import pytest

from stpool_eeg.montage import shipped_montage
from stpool_eeg.synthetic import half_montage


@pytest.fixture(scope="session")
def montage64():
    return shipped_montage()


@pytest.fixture(scope="session")
def montage32():
    return half_montage()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
