import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hyperharm.transforms import CalibrationRegistry

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("default")


@pytest.fixture
def registry():
    return CalibrationRegistry()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
