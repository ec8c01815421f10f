import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from minnoise.integrator import IntegrationConfig
from minnoise.model import preset
from minnoise.spectral import spectral_report

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def params():
    return preset("huang2003_1d")


@pytest.fixture(scope="session")
def report(params):
    return spectral_report(params)


@pytest.fixture(scope="session")
def rho_inf(report):
    return report.fixed_point.rho_inf


@pytest.fixture(scope="session")
def config():
    return IntegrationConfig(t_end=2000.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(" C", 1)[1].split(" ", 1)[0])):
            terminalreporter.write_line(line)
