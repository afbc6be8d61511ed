import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from multiscaling.processes import PathSeries
from multiscaling.rng import RngSpec
from multiscaling.twostage import TestConfig, TestVerdict

# dataclasses, not test classes; stop pytest from trying to collect them
TestConfig.__test__ = False
TestVerdict.__test__ = False

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

#: the tuned grid every heavy-tail-free series ends up with (alpha = 2, s = 0.8)
FULL_Q_GRID = np.round(np.arange(1, 16) * 0.1, 12)


def brownian_series(seed: int, n: int) -> PathSeries:
    """Plain Brownian path of n values starting at 0, unit increment SD."""
    inc = RngSpec(seed).generator().standard_normal(n - 1)
    values = np.concatenate([[0.0], np.cumsum(inc)])
    return PathSeries(values=values, increments=inc, meta={"kind": "test_brownian"})


@pytest.fixture
def tmp_out(tmp_path):
    return str(tmp_path)
