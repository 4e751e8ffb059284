"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils import check_array, check_scalar

from .problem import PairwiseObjective, QuadraticProblem


def check_problem(problem):
    """Accept a problem object or an ``(A, b)`` pair."""
    if isinstance(problem, (QuadraticProblem, PairwiseObjective)):
        return problem
    if isinstance(problem, tuple) and len(problem) == 2:
        A, b = problem
        A = check_array(A, accept_sparse="csr", dtype=float)
        b = check_array(np.asarray(b, dtype=float).reshape(1, -1), dtype=float).ravel()
        return QuadraticProblem(A, b)
    raise TypeError(f"expected a QuadraticProblem, PairwiseObjective or (A, b) pair, got {type(problem).__name__}")


def check_x0(x0, n: int) -> np.ndarray:
    if x0 is None:
        return np.zeros(n)
    x0 = check_array(np.asarray(x0, dtype=float).reshape(1, -1), dtype=float, ensure_all_finite=True).ravel()
    if x0.shape != (n,):
        raise ValueError(f"x0 has {x0.size} entries, expected {n}")
    return x0


def check_grid_points(points: int, name: str = "grid_points") -> int:
    check_scalar(points, name, numbers.Integral, min_val=65)
    if (points - 1) & (points - 2):
        raise ValueError(f"{name} must be 2^k + 1 (e.g. 513, 1025, 2049), got {points}")
    return int(points)


def check_tolerance(tol: float, name: str = "tol") -> float:
    check_scalar(tol, name, numbers.Real, min_val=0.0, include_boundaries="neither")
    return float(tol)


def check_iterations(t_max: int, name: str = "t_max") -> int:
    check_scalar(t_max, name, numbers.Integral, min_val=1)
    return int(t_max)
