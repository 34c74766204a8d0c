import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lognls import GaussianInit, Grid, ModelParams, WaveField, evolve_gaussian, solve_tau  # noqa: E402

# criterion id -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0]), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<5} {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def tau_1e6():
    return solve_tau(1.0, 1e6)


@pytest.fixture(scope="session")
def gauss_1e6():
    return evolve_gaussian(GaussianInit(1.0, (1.0,)), 1.0, 1e6)


@pytest.fixture
def grid1():
    return Grid(1, 512, 12.0)


@pytest.fixture
def params():
    return ModelParams(1.0)


def gaussian_wave(grid, a=1.0, b=1.0, x0=0.0):
    x = grid.mesh()
    q = sum((xi - x0) ** 2 for xi in x)
    return WaveField(grid, b * np.exp(-0.5 * a * q))
