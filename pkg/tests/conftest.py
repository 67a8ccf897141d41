import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hollowvortex import desingularization as ds
from hollowvortex import point_vortex as pv

settings.register_profile(
    "default", max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

RHOS = (0.02, 0.01, 0.005)


@pytest.fixture(scope="session")
def trio():
    return pv.trio()


@pytest.fixture(scope="session")
def quartet():
    return pv.quartet()


@pytest.fixture(scope="session")
def trio_family(trio):
    return ds.newton_family(trio, pv.TRIO_SPLITS[0], RHOS)


@pytest.fixture(scope="session")
def quartet_family(quartet):
    return ds.newton_family(quartet, pv.QUARTET_SPLIT, RHOS)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_density(rng, N, scale=1.0, decay=0.7):
    from hollowvortex.fourier import FourierDensity

    a = {n: scale * decay**n * complex(rng.standard_normal(), rng.standard_normal()) for n in range(1, N + 1)}
    return FourierDensity.from_positive(a)


TWO_PI = 2 * math.pi


# acceptance criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
