import warnings

import numpy as np
import pytest

from stratafront import media, speeds

warnings.filterwarnings("ignore", message=".*TBB.*")


@pytest.fixture(autouse=True)
def _fresh_caches():
    # keep cache state from leaking between tests that assert on solver paths
    yield
    speeds.clear_speed_cache()


@pytest.fixture(scope="session")
def random_ensemble():
    """Twenty seeded smooth media with unit mass on the unit cell."""
    return [media.random_medium(1.0, 1.0, 1.0, seed=s) for s in range(20)]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
