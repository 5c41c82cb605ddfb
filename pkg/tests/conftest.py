"""
Shared fixtures: tiny seeded datasets and models so the suite runs in seconds.
"""
import os

import numpy as np
import pytest

os.environ.setdefault('STEERGUARD_SILENT_STARTUP', '1')

from steerguard import create_app  # noqa: E402
from steerguard.attacks import AttackConfig  # noqa: E402
from steerguard.data import generate_synthetic  # noqa: E402
from steerguard.models import TrainConfig, build_model, train_model  # noqa: E402

TINY = 8
SMALL = 16


@pytest.fixture
def app(tmp_path):
    """Testing app with artifacts and logs under the test's tmp dir"""
    return create_app('testing', overrides={
        'ARTIFACT_ROOT': str(tmp_path),
        'LOG_DIR': str(tmp_path / 'logs'),
    })


@pytest.fixture(scope='session')
def tiny_data():
    return generate_synthetic(12, size=TINY, seed=3, strict_size=False)


@pytest.fixture(scope='session')
def small_data():
    return generate_synthetic(16, size=SMALL, seed=5, strict_size=False)


@pytest.fixture
def tiny_model():
    return build_model('EpochS', TINY, seed=0, strict_size=False)


@pytest.fixture(scope='session')
def trained_tiny_model(tiny_data):
    """Shared trained model; tests must not modify it"""
    model = build_model('EpochS', TINY, seed=1, strict_size=False)
    train_model(model, tiny_data, TrainConfig(epochs=3, batch_size=4, seed=1))
    return model


@pytest.fixture
def fast_attack_cfg():
    return AttackConfig(delta=0.05, opt_max_iters=15, gan_epochs=2, gan_batch_size=6)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
