import numpy as np
import pytest

from dynpersuasion import induced_flow_payoff, load_fixture
from dynpersuasion._accel import HAVE_NUMBA
from dynpersuasion.hjb_fd import solve_fd

BACKENDS = ["numpy"] + (["numba"] if HAVE_NUMBA else [])


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # compile (or load cached) numba kernels once so timed tests measure solving
    if HAVE_NUMBA:
        u = induced_flow_payoff(load_fixture("two_action"))
        solve_fd(u, 1.0, 101, backend="numba")
    yield


@pytest.fixture(scope="session")
def fixtures():
    names = ("two_action", "three_action", "quartic", "common_payoff", "concave")
    return {n: load_fixture(n) for n in names}


@pytest.fixture(scope="session")
def payoffs(fixtures):
    return {n: induced_flow_payoff(m) for n, m in fixtures.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
