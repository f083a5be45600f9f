import numpy as np
import pytest
from hypothesis import settings

from mimobc import kernels
from mimobc.channel import SnrProfile, SystemDims, sample_channel
from mimobc.matkernel import child_rng

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

BACKENDS = sorted(kernels.available_backends())
_SWAPPED = ("waterfill", "successive_norms", "mac_eval", "weighted_mac_solve")


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per importable kernel backend."""
    mod = kernels.available_backends()[request.param]
    for name in _SWAPPED:
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return request.param


def draw(M, K, N=1, seed=0, i=0, gamma=None):
    prof = None if gamma is None else SnrProfile(tuple(gamma))
    return sample_channel(SystemDims(M, K, N), prof, child_rng(seed, i))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
