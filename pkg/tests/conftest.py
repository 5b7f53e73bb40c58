import numpy as np
import pytest


@pytest.fixture(scope="session", autouse=True)
def _quad_cache(tmp_path_factory):
    # keep trapezoid reference values out of the home directory
    mp = pytest.MonkeyPatch()
    mp.setenv("CONVLAB_CACHE", str(tmp_path_factory.mktemp("quad_cache")))
    yield
    mp.undo()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
