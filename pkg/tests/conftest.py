import math

import pytest

from core.problem import IsingInstance, random_instance


@pytest.fixture
def two_node():
    return IsingInstance(n=2, pairwise={(1, 2): 1.0})


@pytest.fixture
def triangle():
    return IsingInstance(n=3, pairwise={(1, 2): 1.0, (1, 3): 2.0, (2, 3): 3.0})


@pytest.fixture
def one_node():
    return IsingInstance(n=1, unary={1: 5.0})


@pytest.fixture
def random_ising():
    """A handful of small signed Ising instances with unary terms."""
    return [random_instance(n, 1.0, 10.0, signed=True, maxcut_only=False, seed=seed)
            for seed, n in enumerate([2, 3, 3, 4, 4])]


@pytest.fixture
def random_maxcut():
    return [random_instance(n, 1.0, 10.0, maxcut_only=True, seed=100 + seed)
            for seed, n in enumerate([2, 3, 4, 4])]


HALF_PI = math.pi / 2
