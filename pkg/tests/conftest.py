import numpy as np
import pytest
from hypothesis import settings

from liouville_conj.manifold import AProfile, Manifold, general_base_point

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ell2():
    return Manifold.build([3.0, 2.0, 1.0])


@pytest.fixture(scope="session")
def ell3():
    return Manifold.build([4.0, 3.0, 2.0, 1.0])


@pytest.fixture(scope="session")
def sphere2():
    return Manifold.build([3.0, 2.0, 1.0], AProfile.constant(1.0))


@pytest.fixture(scope="session")
def p2(ell2):
    return general_base_point(ell2)


@pytest.fixture(scope="session")
def p3(ell3):
    return general_base_point(ell3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
