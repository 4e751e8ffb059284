import numpy as np
import pytest
from sklearn.base import clone

from conftest import quartic_cycle, refuted_three, two_node
from minsum.estimators import DominanceCertifier, MinSumSolver


def test_solver_quadratic():
    est = MinSumSolver(tol=1e-12).fit(two_node())
    np.testing.assert_allclose(est.x_, [2 / 3, -1 / 3])
    assert est.converged_ and est.n_iter_ == 3 and est.certificate_.lam == pytest.approx(0.5)


def test_solver_accepts_matrix_pair():
    est = MinSumSolver().fit((np.array([[2.0, 1.0], [1.0, 2.0]]), [1.0, 0.0]))
    np.testing.assert_allclose(est.x_, [2 / 3, -1 / 3])


def test_solver_general_and_forced_grid():
    est = MinSumSolver(grid_points=513).fit(quartic_cycle())
    assert est.converged_ and est.trace_.grid_points[0] == 513
    forced = MinSumSolver(force_general=True, t_max=10).fit(two_node())
    np.testing.assert_allclose(forced.x_, [2 / 3, -1 / 3], atol=1e-6)


def test_params_round_trip():
    est = MinSumSolver(t_max=7, margin=3.0)
    assert est.get_params()["t_max"] == 7
    assert clone(est).get_params() == est.get_params()
    est.set_params(t_max=9)
    assert est.t_max == 9


@pytest.mark.parametrize("kw", [{"t_max": 0}, {"tol": -1.0}, {"grid_points": 1000}, {"margin": 1.0}, {"x0": [1.0]}])
def test_solver_rejects_bad_params(kw):
    with pytest.raises((ValueError, TypeError)):
        MinSumSolver(force_general=True, **kw).fit(two_node())


def test_solver_rejects_unknown_problem():
    with pytest.raises(TypeError):
        MinSumSolver().fit("not a problem")


def test_certifier():
    assert DominanceCertifier().fit(two_node()).certified_
    ref = DominanceCertifier().fit(refuted_three())
    assert not ref.certified_ and ref.certificate_.lambda_star == pytest.approx(1.2)
    sampled = DominanceCertifier(lam=0.6, samples=128).fit(quartic_cycle())
    assert sampled.certified_ and sampled.certificate_.kind == "sampled"
    assert not DominanceCertifier(lam=0.5, samples=128).fit(quartic_cycle()).certified_
