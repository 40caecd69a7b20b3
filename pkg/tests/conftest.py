import numpy as np
import pytest

from pdcwigner.crystal import CrystalParams
from pdcwigner.modes import build_mode_grid

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(number: int, title: str, passed: bool, detail: str) -> bool:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} | {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_grid():
    return build_mode_grid(4, 2.0, 0.2, 1.0, 1.0)


@pytest.fixture(scope="session")
def default_grid():
    return build_mode_grid(16, 2.0, 0.2, 1.0, 1.0)


@pytest.fixture(scope="session")
def params():
    return CrystalParams(g=0.05, pump_amplitude=1.0, transit_time=1.0, pump_frequency=2.0)
