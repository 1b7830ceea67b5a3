import numpy as np
import pytest

from ms_steer import fixtures


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def basins():
    return fixtures.two_basin()
