import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import HUB_EDGES, hub_quadratic, quartic_cycle, three_cycle, two_node
from minsum.generate import generate_random_sdd
from minsum.problem import Graph
from minsum.reference import solve_quadratic_direct
from minsum.tree import (TreeTooLargeError, build_tree, key_property_check, projected_tree_size, solve_tree_exact,
                         solve_tree_quadratic, tree_quadratic_problem)


def test_hubs_tree_levels():
    g = Graph(5, HUB_EDGES)
    t = build_tree(g, 0, 4)
    np.testing.assert_array_equal(t.level_sizes(), [1, 3, 3, 6, 6])
    assert t.size == 19
    assert build_tree(g, 0, 3).size == 13


def test_tree_graph_unrolls_to_itself():
    g = Graph(6, [(0, 1), (1, 2), (1, 3), (3, 4), (4, 5)])
    t = build_tree(g, 2, g.eccentricity(2) + 2)
    assert sorted(t.label.tolist()) == list(range(6))


def test_two_node_chain_tree():
    g = Graph(2, [(0, 1)])
    t = build_tree(g, 0, 2)
    assert t.size == 2 and t.label.tolist() == [0, 1]
    value, _, _ = solve_tree_exact(two_node(), 0, 2)
    assert value == pytest.approx(2 / 3, abs=1e-15)


def test_three_cycle_depth_one_gives_two_sevenths():
    value, _, _ = solve_tree_exact(three_cycle(), 0, 1)
    assert value == pytest.approx(2 / 7, abs=1e-15)
    res = key_property_check(three_cycle(), 0, 1)
    assert res.difference <= 1e-15


def test_single_node_tree():
    q = two_node()
    value, tree, _ = solve_tree_exact(q, 0, 0)
    assert tree.size == 1
    # the lone root absorbs the zero initial message
    assert value == pytest.approx(0.5)


def test_elimination_matches_dense_solve():
    q = generate_random_sdd(7, 3, 0.8, 2)
    x0 = np.random.default_rng(0).normal(size=7)
    t = build_tree(q.graph, 3, 3)
    np.testing.assert_allclose(solve_tree_quadratic(q, t, x0), solve_quadratic_direct(tree_quadratic_problem(q, t, x0)),
                               atol=1e-12)


@pytest.mark.parametrize("depth", range(6))
def test_hubs_key_property(depth):
    q = hub_quadratic()
    for r in range(5):
        assert key_property_check(q, r, depth).difference <= 1e-9


@given(st.integers(0, 10_000), st.integers(4, 12))
def test_size_recurrence(seed, n):
    q = generate_random_sdd(n, 3, 0.5, seed)
    g = q.graph
    deg = np.array([len(v) for v in g.neighbors])
    t = build_tree(g, 0, 4)
    sizes = t.level_sizes()
    assert sizes[1] == deg[0]
    for d in range(1, 4):
        assert sizes[d + 1] == np.sum(deg[t.label[t.level == d]] - 1)
    assert projected_tree_size(g, 0, 4) == t.size
    for v in range(1, t.size):
        assert g.has_edge(int(t.label[v]), int(t.label[t.parent[v]]))


@given(st.integers(0, 10_000))
def test_key_property_random_tree(seed):
    q = generate_random_sdd(9, 1, 0.8, seed, graph="tree")
    x0 = np.random.default_rng(seed).normal(size=9)
    for t in range(4):
        assert key_property_check(q, seed % 9, t, x0=x0).difference <= 1e-12


def test_guardrail():
    q = generate_random_sdd(30, 4, 0.5, 0)
    with pytest.raises(TreeTooLargeError):
        build_tree(q.graph, 0, 20)
    assert build_tree(q.graph, 0, 3, max_nodes=10_000).size == projected_tree_size(q.graph, 0, 3)


def test_quartic_key_property():
    obj = quartic_cycle()
    res = key_property_check(obj, 0, 3)
    assert res.difference <= 1e-5
