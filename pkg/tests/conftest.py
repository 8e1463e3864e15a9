import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gerbecalc import cellmodel, forms

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture(scope="session")
def pairing():
    """Calibrated level-1 pairing."""
    return forms.InvariantPairing(1)


@pytest.fixture(scope="session")
def unit_pairing():
    """Pairing with ``c = 1`` (no calibration needed)."""
    return forms.InvariantPairing(1, 1.0)


@pytest.fixture(scope="session")
def model():
    """Built-in circle-group cell model."""
    return cellmodel.circle_model()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """List collecting one summary line per acceptance criterion."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
