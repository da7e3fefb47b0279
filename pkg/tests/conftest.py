import os

import numpy as np
import pytest

from sturm_spectra import Coefficient, CoefficientSet, InterfaceSpec, ProblemSpec
from sturm_spectra.config import SEED_ENV

EXACT_P1 = [22.2066099024, 88.8264396098, 199.8594891221, 355.3057584392, 555.1652475613, 799.4379564882]

_RESULTS = []


def interface_problem(beta_left=1.0, beta_right=4.0, zeta=1 / 3):
    coeffs = CoefficientSet(
        Coefficient.piecewise_constant([beta_left, beta_right], [zeta]),
        Coefficient.constant(0.0),
        Coefficient.constant(1.0),
    )
    return ProblemSpec((0.0, 1.0), coeffs, "dirichlet", InterfaceSpec(zeta))


def shifted_laplace(bc, q=1.0, r=1.0):
    coeffs = CoefficientSet(Coefficient.constant(1.0), Coefficient.constant(q), Coefficient.constant(r))
    return ProblemSpec((0.0, 1.0), coeffs, bc)


@pytest.fixture
def problem1():
    return interface_problem(1.0, 4.0)


@pytest.fixture
def problem2():
    return interface_problem(1.0, 1000.0)


@pytest.fixture
def rng():
    seed = os.environ.get(SEED_ENV)
    return np.random.default_rng(int(seed) if seed else 12345)


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(name, passed, detail)."""

    def record(name, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} {name}: {detail}"
        _RESULTS.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in _RESULTS:
        terminalreporter.write_line(line)
