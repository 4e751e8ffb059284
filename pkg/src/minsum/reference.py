"""Ground-truth minimisers: direct solve for quadratics, damped Newton otherwise."""

from __future__ import annotations

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .problem import PairwiseObjective, QuadraticProblem

DENSE_LIMIT = 512


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


class NewtonError(RuntimeError):
    pass


def _spd_solve(H, rhs) -> np.ndarray:
    n = H.shape[0]
    if n < DENSE_LIMIT:
        dense = H.toarray() if sp.issparse(H) else np.asarray(H)
        try:
            c = la.cho_factor(dense)
        except la.LinAlgError as exc:
            raise NotPositiveDefiniteError("Cholesky factorisation failed: matrix is not positive definite") from exc
        return la.cho_solve(c, rhs)
    # symmetric mode without pivoting: U's diagonal is the LDL^T pivot sequence
    lu = spla.splu(sp.csc_matrix(H), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True})
    if not np.all(lu.U.diagonal() > 0):
        raise NotPositiveDefiniteError("sparse elimination hit a non-positive pivot: matrix is not positive definite")
    return lu.solve(rhs)


def solve_quadratic_direct(q: QuadraticProblem) -> np.ndarray:
    """``x* = A^-1 b`` by Cholesky (dense below 512 unknowns, sparse elimination above)."""
    x = _spd_solve(q.A, q.b)
    return np.asarray(x, dtype=float)


def solve_general_newton(obj: PairwiseObjective, x_init=None, tol: float = 1e-12,
                         max_iter: int = 200, max_halvings: int = 60, c1: float = 1e-4) -> np.ndarray:
    """Newton with Armijo backtracking (step halving) on the analytic sparse Hessian.

    Stops when ``||grad F||_inf <= tol``.
    """
    if isinstance(obj, QuadraticProblem):
        from .problem import quadratic_to_pairwise
        obj = quadratic_to_pairwise(obj)
    x = np.zeros(obj.n) if x_init is None else np.array(x_init, dtype=float)
    if x.shape != (obj.n,):
        raise ValueError(f"x_init has shape {x.shape}, expected ({obj.n},)")
    fx = obj.value(x)
    for _ in range(max_iter + 1):
        g = obj.gradient(x)
        if np.max(np.abs(g), initial=0.0) <= tol:
            return x
        step = -_spd_solve(obj.hessian(x), g)
        slope = float(g @ step)
        gnorm = np.max(np.abs(g))
        if -slope <= 100 * np.finfo(float).eps * (1 + abs(fx)):
            # F cannot resolve the predicted decrease: judge the full step by the gradient
            x_new = x + step
            if np.max(np.abs(obj.gradient(x_new))) < gnorm:
                x, fx = x_new, obj.value(x_new)
                continue
            raise NewtonError(f"stalled at the rounding floor with |grad|_inf={gnorm:.3g} > {tol}")
        t = 1.0
        for _ in range(max_halvings + 1):
            x_new = x + t * step
            f_new = obj.value(x_new)
            if f_new <= fx + c1 * t * slope:
                break
            t *= 0.5
        else:
            raise NewtonError(f"line search failed after {max_halvings} halvings (|grad|_inf={gnorm:.3g})")
        x, fx = x_new, f_new
    raise NewtonError(f"Newton did not reach |grad|_inf <= {tol} in {max_iter} iterations")


def exact_minimiser(problem, x_init=None, tol: float = 1e-12) -> np.ndarray:
    if isinstance(problem, QuadraticProblem):
        return solve_quadratic_direct(problem)
    return solve_general_newton(problem, x_init, tol=tol)
