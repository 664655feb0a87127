import numpy as np
import pytest

from sgalign import EncoderConfig, init_weights


@pytest.fixture(scope="session")
def default_weights():
    return init_weights(EncoderConfig(), seed=0)


@pytest.fixture(scope="session")
def small_config():
    """Cheap encoder for tests that exercise structure, not scale."""
    return EncoderConfig(pe_dim=8, heads=2, layers=2, d_model=32,
                         gate_hidden=4, geo_hidden=6, feature_dims=(10, 12))


@pytest.fixture(scope="session")
def small_weights(small_config):
    return init_weights(small_config, seed=7)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
