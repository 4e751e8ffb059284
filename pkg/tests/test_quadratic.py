import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import refuted_three
from minsum.dominance import certify_quadratic
from minsum.generate import generate_random_sdd
from minsum.problem import QuadraticProblem
from minsum.quadratic import (DivergenceError, WellPosednessError, init_messages_quadratic, p3_violations,
                              run_quadratic, update_messages_quadratic)
from minsum.reference import solve_quadratic_direct


def test_zero_init(q2):
    s = init_messages_quadratic(q2)
    assert s.t == 0 and np.all(s.alpha == 0) and np.all(s.beta == 0)


def test_x0_init(q2):
    s = init_messages_quadratic(q2, x0=[1.0, 0.0])
    assert s.message(q2, 0, 1) == (0.0, -1.0)
    assert s.message(q2, 1, 0) == (0.0, 0.0)


def test_rho_check(q2):
    e = q2.graph.directed_index(0, 1)
    alpha = np.zeros(2)
    alpha[e] = -0.6
    init_messages_quadratic(q2, alpha0=alpha, rho_check=(0.6, 0.5, np.ones(2)))
    alpha[e] = -0.7
    with pytest.raises(ValueError, match="admissible floor"):
        init_messages_quadratic(q2, alpha0=alpha, rho_check=(0.6, 0.5, np.ones(2)))
    with pytest.raises(ValueError, match="rho"):
        init_messages_quadratic(q2, rho_check=(2.5, 0.5, np.ones(2)))


def test_first_update_by_hand(q2):
    s0 = init_messages_quadratic(q2)
    s1 = update_messages_quadratic(q2, s0)
    assert s1.message(q2, 0, 1) == (-0.5, -0.5)
    assert s1.message(q2, 1, 0) == (-0.5, 0.0)
    np.testing.assert_allclose(s1.estimates, [0.5, 0.0])
    assert s0.t == 0 and np.all(s0.alpha == 0)
    s2 = update_messages_quadratic(q2, s1)
    np.testing.assert_allclose(s2.estimates, [2 / 3, -1 / 3], atol=1e-15)


def test_three_cycle_by_hand(q3):
    tr = run_quadratic(q3, t_max=2, tol=1e-300)
    np.testing.assert_allclose(tr.x[1], [0.5] * 3)
    np.testing.assert_allclose(tr.x[2], [2 / 7] * 3)
    np.testing.assert_allclose(solve_quadratic_direct(q3), [1 / 3] * 3)


def test_run_two_node_terminates_at_three(q2):
    tr = run_quadratic(q2, tol=1e-12)
    assert tr.converged and tr.n_iter == 3
    np.testing.assert_allclose(tr.final, [2 / 3, -1 / 3], atol=1e-15)


def test_run_diagonal():
    q = QuadraticProblem.from_dense(np.diag([2.0, 4.0]), [1.0, -2.0])
    tr = run_quadratic(q)
    np.testing.assert_array_equal(tr.x[1], [0.5, -0.5])
    assert tr.n_iter == 2 and tr.converged


def test_run_three_cycle_contracts(q3):
    tr = run_quadratic(q3, t_max=60, tol=1e-300)
    err = np.abs(tr.x[1:] - 1 / 3).max(axis=1)
    nz = err[err > 0]
    assert np.all(np.diff(nz) < 0)
    assert err[-1] <= 1e-12


def test_run_argument_checks(q2):
    with pytest.raises(ValueError):
        run_quadratic(q2, t_max=0)
    with pytest.raises(ValueError):
        run_quadratic(q2, tol=0)


def test_non_dominant_aborts_with_location():
    q = refuted_three()
    with pytest.raises(WellPosednessError) as info:
        run_quadratic(q, t_max=100)
    err = info.value
    assert err.value <= 0 and (err.edge is not None or err.node is not None)


def test_divergence_is_reported():
    q = QuadraticProblem.from_dense([[1e-300, 1.0], [1.0, 1e-300]], [1e300, 1e300])
    with pytest.raises((WellPosednessError, DivergenceError)):
        run_quadratic(q, t_max=10)


@given(st.integers(3, 25), st.integers(0, 10_000), st.floats(0.1, 0.9))
def test_p3_invariants_and_fixed_point(n, seed, lam_target):
    q = generate_random_sdd(n, 2 if n > 3 else 1, lam_target, seed)
    c = certify_quadratic(q)
    tr = run_quadratic(q, t_max=300, keep_states=True)
    for s in tr.states:
        assert p3_violations(q, s, c.lam, c.w) == []
    assert tr.converged
    assert np.max(np.abs(q.A @ tr.final - q.b)) <= 1e-9 * max(np.max(np.abs(q.b)), 1.0)


@given(st.integers(3, 15), st.integers(0, 10_000))
def test_permutation_equivariance(n, seed):
    q = generate_random_sdd(n, 2, 0.7, seed)
    perm = np.random.default_rng(seed).permutation(n)
    tr = run_quadratic(q, t_max=15, tol=1e-300)
    tp = run_quadratic(q.relabel(perm), t_max=15, tol=1e-300)
    np.testing.assert_allclose(tp.x[:, perm], tr.x, rtol=1e-12, atol=1e-14)
