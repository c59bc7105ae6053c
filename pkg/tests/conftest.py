import numpy as np
import pytest

from koopman_spectral.config import exp1_configs, exp2_configs
from koopman_spectral.pipelines import build_config_dataset
from koopman_spectral.spectral_loss import precompute_gram


@pytest.fixture(scope="session")
def exp1():
    """{delta: (config, dataset, blocks)} for the Klus system."""
    out = {}
    for cfg in exp1_configs(seed=0):
        ds = build_config_dataset(cfg)
        out[cfg.sampling["delta"]] = (cfg, ds, precompute_gram(ds, cfg.dictionary))
    return out


@pytest.fixture(scope="session")
def exp2():
    """{"regular0.01" | "regular0.2" | "irregular": (config, dataset, blocks)}."""
    keys = ["regular0.01", "regular0.2", "irregular"]
    out = {}
    for key, cfg in zip(keys, exp2_configs(seed=0)):
        ds = build_config_dataset(cfg)
        out[key] = (cfg, ds, precompute_gram(ds, cfg.dictionary))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
