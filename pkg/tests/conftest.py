"""Shared scenario builders for the test suite."""

import numpy as np
import pytest

from lensopt.scenario import scenario_from_config


def make_scenario(**overrides):
    """Scenario from DEFAULT_CONFIG with nested overrides applied."""
    config = {}
    for key, val in overrides.items():
        config[key] = val
    return scenario_from_config(config)


def zero_data_config(nx=16, n_steps=16, **extra):
    """Scenario with no excitation at all: S(phi) = 0 for every phi."""
    cfg = {
        "grid": {"nx": nx, "ny": nx},
        "time": {"t_final": 0.5, "time_step": 0.5 / n_steps},
        "source": {"amplitude": 0.0},
        "target": {"phi_true": {"kind": "constant", "value": 1.0}},
    }
    cfg.update(extra)
    return cfg


def pulse_config(nx=32, n_steps=64, t_final=1.0, amplitude=0.2, **extra):
    """Left-edge gaussian sine burst aimed at a right-side focal disk."""
    cfg = {
        "grid": {"nx": nx, "ny": nx},
        "time": {"t_final": t_final, "time_step": t_final / n_steps},
        "source": {"amplitude": amplitude, "frequency": 3.0, "ramp_time": 0.5,
                   "spatial": "gaussian", "center": 0.5, "width": 0.2,
                   "edges": ["left"]},
    }
    cfg.update(extra)
    return cfg


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
