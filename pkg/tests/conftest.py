import numpy as np
import pytest

from qpscope.config import ExperimentConfig

TWO_PI = 2.0 * np.pi

# device parameter block used throughout: decay 13 MHz, splitting 20 MHz,
# mean transition 4.724 GHz, slow rates (0.85, 13) 1/s
GAMMA = TWO_PI * 13e6
DELTA = TWO_PI * 20e6
F01_MEAN = 4.724e9
GAMMA0 = 0.85
GAMMA1 = 13.0
MAGIC_X = 2.0**-0.5


def base_config_dict(**overrides):
    cfg = {
        "schema_version": 1,
        "detector": {"f01_mean_hz": F01_MEAN, "splitting_hz": 20e6, "gamma_hz": 13e6},
        "rates": {"gamma0": GAMMA0, "gamma1": GAMMA1},
        "drive": {"mode": "dual", "x": MAGIC_X},
        "noise": {"snr_10us": 2.0, "eta": 0.04, "bin_time_s": 1e-3},
        "run": {"duration_s": 120.0, "seed": 11},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and key in cfg:
            cfg[key] = {**cfg[key], **value}
        else:
            cfg[key] = value
    return cfg


@pytest.fixture
def base_config():
    return ExperimentConfig.from_dict(base_config_dict())
