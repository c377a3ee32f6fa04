import numpy as np
import pytest

from earlir.config import FeatureParams
from earlir.dataset import make_protocol, synth_dataset
from earlir.pipeline import FeatureCache


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """6 subjects x 10 well-separated samples, shared across tests."""
    out = tmp_path_factory.mktemp("synth_small")
    manifest = synth_dataset(out, n_subjects=6, n_samples=10, width=60, height=80,
                             noise_sigma=0.02, shift_max=1, seed=11)
    return manifest


@pytest.fixture(scope="session")
def small_protocol(small_dataset):
    return make_protocol(small_dataset, "left", n_train_subjects=4, n_train_samples=2,
                         n_probe_samples=7, seed=11)


@pytest.fixture(scope="session")
def small_cache(small_protocol):
    return FeatureCache(small_protocol, FeatureParams())


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
