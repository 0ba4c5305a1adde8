import pytest
from hypothesis import HealthCheck, settings

from threepath.model import DetectorModel, InterferometerConfig

settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    max_examples=100,
)
settings.load_profile("suite")


@pytest.fixture
def apd():
    """Detector with the reference dead time and dark rate."""
    return DetectorModel(dead_time=47e-9, dark_rate=284.0)


@pytest.fixture
def fig_config():
    """Single-path rates from the reference contour-scan measurement."""
    return InterferometerConfig(rate_a=2080.0, rate_b=5760.0, rate_c=1990.0)
