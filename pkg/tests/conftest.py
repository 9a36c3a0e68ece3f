import numpy as np
import pytest

from oranfl.config import default_config


def small_config(**overrides):
    """The default scenario shrunk so a full run takes a second or two."""
    base = {
        "fl.rounds": 2,
        "fl.samples_per_client": 40,
        "fl.test_samples_per_class": 10,
        "eapp.epochs": 5,
        "control.warmup": 30.0,
    }
    base.update(overrides)
    return default_config().replace(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_cfg():
    return small_config()
