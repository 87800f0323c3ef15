import numpy as np
import pytest

from hriloop import assets


@pytest.fixture(scope="session")
def human22():
    return assets.load_skeleton("human22")


@pytest.fixture(scope="session")
def unitree_h1():
    return assets.load_skeleton("unitree_h1")


@pytest.fixture(scope="session")
def leju_kuavo():
    return assets.load_skeleton("leju_kuavo")


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
