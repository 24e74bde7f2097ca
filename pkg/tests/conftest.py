import numpy as np
import pytest

from geomquant.expr import PhaseSpace


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture
def space1():
    return PhaseSpace(1)


@pytest.fixture
def space2():
    return PhaseSpace(2)


@pytest.fixture
def space3():
    return PhaseSpace(3)
