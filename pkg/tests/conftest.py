import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from uapaudio import build_victim, generate_synthetic_dataset, train

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=50,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def bandtone_ds():
    """3-class AM-tone dataset at integration scale (d=2048, 60/30 per class)."""
    return generate_synthetic_dataset(3, 60, 2048, seed=0, test_per_class=30)


@pytest.fixture(scope="session")
def victim(bandtone_ds):
    """Trained rand-cnn victim shared across tests.

    Attacks must not mutate parameters (asserted separately); tests that
    train a model build their own.
    """
    model = build_victim("rand-cnn", bandtone_ds.dim, bandtone_ds.num_classes, seed=0)
    train(model, bandtone_ds, epochs=25, seed=0)
    return model


@pytest.fixture(scope="session")
def train_xy(bandtone_ds):
    return bandtone_ds.arrays("train")


@pytest.fixture(scope="session")
def test_xy(bandtone_ds):
    return bandtone_ds.arrays("test")


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
