import numpy as np
import pytest

from ppspdc import Axis, ProcessConfig, Wave, default_model


@pytest.fixture(scope="session")
def model():
    return default_model()


@pytest.fixture(scope="session")
def forward_532():
    """Co-propagating type-II process pumped at 532 nm (y -> z + y)."""
    return ProcessConfig(pump=Wave(0.532, Axis.Y), epsilon=+1)


@pytest.fixture(scope="session")
def backward_532():
    """Counter-propagating type-II process pumped at 532 nm."""
    return ProcessConfig(pump=Wave(0.532, Axis.Y), epsilon=-1)


@pytest.fixture(scope="session")
def forward_uv():
    """Co-propagating type-II process pumped at 397.5 nm (8.9 um QPM scenario)."""
    return ProcessConfig(pump=Wave(0.3975, Axis.Y), epsilon=+1)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1905)
