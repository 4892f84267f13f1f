import numpy as np
import pytest

from smpec_problem import builtin_benchmark, synthetic_quadratic_instance


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run desk-scale reproductions marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


@pytest.fixture(scope="session")
def benchmark5():
    return builtin_benchmark(5)


@pytest.fixture(scope="session")
def quadratic():
    return synthetic_quadratic_instance(n=3, p=2, m=4, seed=1, zeta_std=0.1)
