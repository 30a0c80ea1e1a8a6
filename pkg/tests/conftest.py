import numpy as np
import pytest
from hypothesis import settings

from roughcont import _accel

settings.register_profile("ci", max_examples=30, deadline=None)
settings.load_profile("ci")

BACKENDS = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    prev = _accel.set_backend(request.param)
    yield request.param
    _accel.set_backend(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
