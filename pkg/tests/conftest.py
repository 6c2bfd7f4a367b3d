import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from zeroqueue import catalog

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


PLAIN_EXAMPLES = {
    "mm1": catalog.mm1,
    "z3z3": lambda: catalog.z3_star_z3(0.25),
    "z3z3_p01": lambda: catalog.z3_star_z3(0.1),
    "nb": lambda: catalog.n_star_b(0.5),
    "nzb": lambda: catalog.n_star_z_star_b(0.3, 0.4),
    "zc": lambda: catalog.z_star_c(0.6, 0.1),
}

GENERAL_EXAMPLES = {
    "zqueue": lambda: catalog.z_pair(0.6),
    "bicyclic_04": lambda: catalog.bicyclic(0.4),
    "bicyclic_075": lambda: catalog.bicyclic(0.75),
    "bicyclic_c": lambda: catalog.bicyclic_star_c(0.4, 0.4),
}

ALL_EXAMPLES = {**PLAIN_EXAMPLES, **GENERAL_EXAMPLES}


@pytest.fixture
def z3z3():
    return catalog.z3_star_z3(0.25)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
