import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from leafpressure import CAT_MAP, PRODUCT_MAP, make_splitting, make_toral_system

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

LOG_LU = float(np.log((3 + np.sqrt(5)) / 2))
LOG_L1 = float(np.log(2 + np.sqrt(3)))

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def cat():
    return make_toral_system(CAT_MAP)


@pytest.fixture(scope="session")
def cat_u(cat):
    return make_splitting(cat)


@pytest.fixture(scope="session")
def product():
    return make_toral_system(PRODUCT_MAP)


@pytest.fixture(scope="session")
def pert():
    return make_toral_system(CAT_MAP, eps_p=0.05)


@pytest.fixture(scope="session")
def pert_u(pert):
    return make_splitting(pert)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
