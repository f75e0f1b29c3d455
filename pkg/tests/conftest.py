import os

import pytest
from hypothesis import HealthCheck, settings

from sivkinetics.config import DeviceConfig
from sivkinetics.protocol import Model

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def cfg():
    return DeviceConfig()


@pytest.fixture(scope="session")
def model(cfg):
    return Model(cfg)


# one PASS/FAIL line per acceptance criterion, printed after the run
VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[VERDICTS] = {}


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash.get(VERDICTS, {})
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for n in sorted(verdicts):
            terminalreporter.write_line(verdicts[n])


@pytest.fixture
def verdicts(request):
    return request.config.stash[VERDICTS]
