import numpy as np
import pytest

from furstlab.boundary import sample_measure
from furstlab.cocycle import lyapunov_spectrum
from furstlab.fixtures import load_fixture, load_targets


@pytest.fixture(scope="session")
def e1():
    return load_fixture("E1")


@pytest.fixture(scope="session")
def e2():
    return load_fixture("E2")


@pytest.fixture(scope="session")
def e3():
    return load_fixture("E3")


@pytest.fixture(scope="session")
def e4():
    return load_fixture("E4")


@pytest.fixture(scope="session")
def targets():
    return load_targets()


@pytest.fixture(scope="session")
def sp2(e2):
    return lyapunov_spectrum(e2, 100_000, range(8))


@pytest.fixture(scope="session")
def sp3(e3):
    return lyapunov_spectrum(e3, 100_000, range(8))


@pytest.fixture(scope="session")
def nu2(e2):
    return sample_measure(e2, 100_000, 100, seed=11)


@pytest.fixture(scope="session")
def nu3(e3):
    return sample_measure(e3, 100_000, 100, seed=21)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
