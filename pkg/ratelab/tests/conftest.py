"""Shared test fixtures: seeded generators, standard channels and an API client."""

import math

import numpy as np
import pytest

from ratelab.config import DEFAULTS

from .helpers import choi_of


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def identity():
    return choi_of("identity")


@pytest.fixture
def depolarizing():
    """Depolarizing channel with error rate 0.1 (Bell weights 0.85, 0.05, 0.05, 0.05)."""
    return choi_of("depolarizing", e=0.1)


@pytest.fixture
def amplitude_damping():
    return choi_of("amplitude_damping", p=0.2)


@pytest.fixture
def rotated():
    return choi_of("rotated_depolarizing", e=0.05, angle=math.pi / 4)


@pytest.fixture
def config():
    cfg = {key: (dict(value) if isinstance(value, dict) else value) for key, value in DEFAULTS.items()}
    cfg["minimizer"] = {"prescan_points": 60, "xatol": 1e-7}
    cfg["noisy_preprocessing"] = {"grid_step": 0.01}
    cfg["figures"] = {"points": 3}
    return cfg


@pytest.fixture
def client(config):
    from ratelab.server import create_app

    app = create_app(config)
    app.config["TESTING"] = True
    with app.test_client() as client:
        yield client
