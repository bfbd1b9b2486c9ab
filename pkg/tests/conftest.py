import numpy as np
import pytest
from hypothesis import settings

from taxislab.grid import Grid
from taxislab.model import Parameters

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def coexistence():
    return Parameters(lambda1=1, lambda2=1, mu1=1, mu2=1, a1=1, a2=0.5)


@pytest.fixture
def degenerate():
    return Parameters(lambda1=1, lambda2=0.5, mu1=1, mu2=1, a1=1, a2=0.5)


@pytest.fixture
def strict():
    return Parameters(lambda1=1, lambda2=0.2, mu1=1, mu2=1, a1=1, a2=0.5)


@pytest.fixture
def h1():
    return Parameters(m1=1.0, m2=1.0)


@pytest.fixture
def grid64():
    return Grid.uniform(64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
