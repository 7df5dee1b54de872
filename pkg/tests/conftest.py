import numpy as np
import pytest

from iqscc import _kernels
from iqscc.config import default_config_text, parse_config

try:
    from iqscc import _speedups
except ImportError:  # pragma: no cover
    _speedups = None

KERNEL_BACKENDS = [pytest.param(_kernels, id="python")]
if _speedups is not None:
    KERNEL_BACKENDS.append(pytest.param(_speedups, id="cython"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def campaign():
    return parse_config(default_config_text())
