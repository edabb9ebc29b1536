import numpy as np
import pytest

from vnhgcn.numerics import _pykernels

try:
    from vnhgcn.numerics import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [pytest.param(_pykernels, id="python"),
            pytest.param(_ckernels, id="cython",
                         marks=pytest.mark.skipif(_ckernels is None, reason="extension not built"))]


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
