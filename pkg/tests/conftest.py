import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from minsum.factors import BilinearEdge, QuarticFactor
from minsum.problem import Graph, PairwiseObjective, QuadraticProblem

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

HUB_EDGES = [(0, 1), (0, 2), (0, 3), (4, 1), (4, 2), (4, 3)]


def two_node():
    return QuadraticProblem.from_dense([[2.0, 1.0], [1.0, 2.0]], [1.0, 0.0])


def three_cycle():
    A = np.full((3, 3), 0.5) + 1.5 * np.eye(3)
    return QuadraticProblem.from_dense(A, np.ones(3))


def refuted_three():
    A = np.full((3, 3), 0.6) + 0.4 * np.eye(3)
    return QuadraticProblem.from_dense(A, np.array([1.0, 0.0, 0.0]))


def quartic_cycle(a=0.3, b=1.0):
    g = Graph(3, [(0, 1), (0, 2), (1, 2)])
    return PairwiseObjective(g, tuple(QuarticFactor(1.0, b) for _ in range(3)),
                             tuple(BilinearEdge(a) for _ in range(3)))


def hub_quadratic(off=0.3, seed=0):
    rng = np.random.default_rng(seed)
    A = np.eye(5)
    for i, j in HUB_EDGES:
        A[i, j] = A[j, i] = off * rng.choice([-1.0, 1.0])
    return QuadraticProblem.from_dense(A, rng.uniform(-1, 1, 5))


@pytest.fixture
def q2():
    return two_node()


@pytest.fixture
def q3():
    return three_cycle()


@pytest.fixture
def quartic3():
    return quartic_cycle()
