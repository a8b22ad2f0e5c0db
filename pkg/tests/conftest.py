import numpy as np
import pytest

from edlaas.ckks import HEParams, keygen


@pytest.fixture(scope="session")
def small_params():
    # Five levels so the reference graph fits; N kept small for speed.
    return HEParams.insecure_test(1024, 5)


@pytest.fixture(scope="session")
def small_keys(small_params):
    return keygen(small_params, np.random.default_rng(1))


@pytest.fixture(scope="session")
def tiny_params():
    return HEParams.insecure_test(256, 2)


@pytest.fixture(scope="session")
def tiny_keys(tiny_params):
    return keygen(tiny_params, np.random.default_rng(2))


@pytest.fixture(scope="session")
def desk_params():
    return HEParams.desk()


@pytest.fixture(scope="session")
def desk_keys(desk_params):
    return keygen(desk_params, np.random.default_rng(3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
