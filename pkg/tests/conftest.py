import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rvmstab.ansatz import make_ansatz
from rvmstab.elliptic import MeridianGrid
from rvmstab.equilibrium import fixed_point_equilibrium
from rvmstab.geometry import Domain

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def torus():
    return Domain.torus(2.0, 0.5)


@pytest.fixture(scope="session")
def ball():
    return Domain.ball(1.0)


@pytest.fixture(scope="session")
def torus_grid(torus):
    return MeridianGrid(torus, 24)


@pytest.fixture(scope="session")
def skewed_ansatz():
    """Two unequal species with p-dependence; gives nonzero phi and A."""
    return make_ansatz("exponential", amplitude_plus=0.4, amplitude_minus=0.2, temperature=0.25,
                       omega=0.3, skew_plus=0.5, skew_minus=-0.2)


@pytest.fixture(scope="session")
def small_equilibrium(torus_grid, skewed_ansatz):
    return fixed_point_equilibrium(skewed_ansatz, torus_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion; printed now and
    repeated in the terminal summary."""

    def record(number, title, passed, detail=""):
        line = "criterion %2d %-4s %s%s" % (number, "PASS" if passed else "FAIL", title,
                                             " (%s)" % detail if detail else "")
        _ACCEPTANCE.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
