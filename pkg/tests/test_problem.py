import numpy as np
import pytest
from hypothesis import given, strategies as st

from minsum.factors import (BilinearEdge, CustomFactor, LogCoshFactor, QuadraticFactor, QuarticFactor,
                            make_edge_factor, make_node_factor)
from minsum.problem import (Graph, PairwiseObjective, QuadraticProblem, evaluate_objective, partial_hessian,
                            quadratic_to_pairwise)
from minsum.generate import generate_random_sdd


def test_objective_values(q2):
    assert evaluate_objective(q2, [0.0, 0.0]) == 0.0
    assert evaluate_objective(q2, [1.0, 1.0]) == pytest.approx(2.0)


def test_quartic_value_isolated():
    obj = PairwiseObjective(Graph(1), (QuarticFactor(1.0),), ())
    assert obj.value([2.0]) == pytest.approx(6.0)


def test_partial_hessian_quadratic(q2):
    x = np.array([0.3, -7.0])
    assert partial_hessian(q2, x, 0, 0) == 2.0
    assert partial_hessian(q2, x, 0, 1) == 1.0


def test_partial_hessian_quartic_with_edge():
    obj = PairwiseObjective(Graph(2, [(0, 1)]), (QuarticFactor(1.0), QuadraticFactor(1.0)), (BilinearEdge(0.3),))
    assert partial_hessian(obj, [2.0, 5.0], 0, 0) == pytest.approx(13.0)
    assert partial_hessian(obj, [2.0, 5.0], 1, 0) == pytest.approx(0.3)


def test_partial_hessian_rejects_non_edge():
    obj = PairwiseObjective(Graph(3, [(0, 1)]), tuple(QuadraticFactor(1.0) for _ in range(3)), (BilinearEdge(0.1),))
    with pytest.raises(ValueError, match="not an edge"):
        partial_hessian(obj, np.zeros(3), 0, 2)


def test_quadratic_to_pairwise_factors(q2):
    obj = quadratic_to_pairwise(q2)
    y = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(obj.node_factors[0].value(y), y ** 2 - y)
    np.testing.assert_allclose(obj.node_factors[1].value(y), y ** 2)
    assert obj.edge_factors[0].value(2.0, 3.0) == pytest.approx(6.0)
    x = np.array([1.0, -1.0])
    assert obj.value(x) == pytest.approx(q2.value(x))
    assert q2.value(x) == pytest.approx(0.0)


def test_diagonal_problem_has_no_edges():
    q = QuadraticProblem.from_dense(np.diag([1.0, 2.0, 3.0]), [1, 1, 1])
    assert quadratic_to_pairwise(q).edge_factors == ()


def test_quadratic_problem_validation():
    with pytest.raises(ValueError, match="symmetric"):
        QuadraticProblem.from_dense([[2, 1], [0.5, 2]], [0, 0])
    with pytest.raises(ValueError, match="diagonal"):
        QuadraticProblem.from_dense([[0, 1], [1, 2]], [0, 0])
    with pytest.raises(ValueError):
        QuadraticProblem.from_dense([[2, 1], [1, 2]], [0, 0, 0])


def test_graph_structure():
    g = Graph(4, [(2, 1), (0, 1), (3, 2)])
    assert g.edges == ((0, 1), (1, 2), (2, 3))
    assert g.is_tree() and g.diameter() == 3
    src, dst = g.directed
    for e in range(src.size):
        assert g.directed_index(src[e], dst[e]) == e
        assert src[g.reverse[e]] == dst[e]
    with pytest.raises(ValueError):
        Graph(2, [(0, 0)])
    with pytest.raises(ValueError):
        Graph(2, [(0, 1), (1, 0)])


def test_factor_validation():
    with pytest.raises(ValueError):
        QuarticFactor(0.0)
    with pytest.raises(ValueError):
        make_node_factor("cubic", a=1.0)
    with pytest.raises(ValueError):
        make_node_factor("quartic", c=1.0, z=2.0)
    with pytest.raises(ValueError):
        make_edge_factor("bilinear", a=1.0, b=2.0)


@pytest.mark.parametrize("f", [QuadraticFactor(2.0, 1.0), QuarticFactor(1.0, 0.5), LogCoshFactor(2.0, 0.5, -1.0)])
def test_builtin_factors_are_coercive(f):
    assert f.value(1e6) > f.value(0.0) and f.value(-1e6) > f.value(0.0)


def test_logcosh_is_stable_for_large_arguments():
    f = LogCoshFactor(1.0, 1.0)
    assert np.isfinite(f.value(1e4))
    assert f.value(1e4) == pytest.approx(1e4 - np.log(2) + 0.5e8)


def _fd_hessian(obj, x, i, j, h=1e-4):
    def F(di, dj):
        y = np.array(x, dtype=float)
        y[i] += di
        y[j] += dj
        return obj.value(y)
    if i == j:
        return (F(h, 0) - 2 * F(0, 0) + F(-h, 0)) / h ** 2
    return (F(h, h) - F(h, -h) - F(-h, h) + F(-h, -h)) / (4 * h * h)


def _mixed_objective():
    g = Graph(3, [(0, 1), (1, 2)])
    wavy = CustomFactor(lambda x: np.cos(x) + x * x, lambda x: -np.sin(x) + 2 * x, lambda x: -np.cos(x) + 2)
    return PairwiseObjective(g, (QuarticFactor(1.0, 0.2), LogCoshFactor(1.5, 0.7, 0.1), wavy),
                             (BilinearEdge(0.4), BilinearEdge(-0.2)))


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_partial_hessian_matches_finite_differences(xs):
    obj = _mixed_objective()
    x = np.array(xs)
    for i, j in [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2)]:
        exact = partial_hessian(obj, x, i, j)
        assert abs(_fd_hessian(obj, x, i, j) - exact) <= 1e-5 * max(1.0, abs(exact))


@given(st.integers(2, 20), st.integers(0, 10_000))
def test_pairwise_representation_matches_matrix_formula(n, seed):
    q = generate_random_sdd(n, 1 if n < 4 else 3, 0.8, seed)
    obj = quadratic_to_pairwise(q)
    rng = np.random.default_rng(seed)
    A = q.A.toarray()
    for _ in range(10):
        x = rng.normal(size=n) * 3
        F = 0.5 * x @ A @ x - q.b @ x
        assert abs(obj.value(x) - F) <= 1e-12 * (1 + abs(F))
        np.testing.assert_allclose(obj.gradient(x), A @ x - q.b, atol=1e-12 * (1 + abs(F)))
        np.testing.assert_allclose(obj.hessian(x).toarray(), A)


def test_relabel_preserves_objective():
    obj = _mixed_objective()
    perm = [2, 0, 1]
    r = obj.relabel(perm)
    x = np.array([0.3, -1.2, 0.7])
    y = np.empty(3)
    y[perm] = x
    assert r.value(y) == pytest.approx(obj.value(x))
