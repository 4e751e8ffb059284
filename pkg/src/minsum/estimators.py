"""Estimator-style front ends: configure with keyword parameters, then ``fit(problem)``."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_scalar

from .dominance import DominanceCertificate, certify, certify_general
from .grid import DEFAULT_POINTS, MAX_POINTS, run_general
from .problem import QuadraticProblem
from .quadratic import run_quadratic
from .validation import check_grid_points, check_iterations, check_problem, check_tolerance, check_x0


class MinSumSolver(BaseEstimator):
    """Synchronous min-sum on a quadratic or general pairwise problem.

    Quadratic problems use closed-form messages unless ``force_general`` is
    set.  ``tol=None`` picks 1e-10 for the closed-form path and 1e-8 on
    grids.

    Attributes set by ``fit``: ``x_``, ``trace_``, ``n_iter_``,
    ``converged_``, ``certificate_`` (``None`` when none is available).
    """

    def __init__(self, t_max=200, tol=None, x0=None, force_general=False, grid_points=DEFAULT_POINTS,
                 max_grid_points=MAX_POINTS, margin=2.0, check=False):
        self.t_max = t_max
        self.tol = tol
        self.x0 = x0
        self.force_general = force_general
        self.grid_points = grid_points
        self.max_grid_points = max_grid_points
        self.margin = margin
        self.check = check

    def fit(self, problem, y=None):
        problem = check_problem(problem)
        t_max = check_iterations(self.t_max)
        x0 = check_x0(self.x0, problem.n)
        quad = isinstance(problem, QuadraticProblem) and not self.force_general
        tol = (1e-10 if quad else 1e-8) if self.tol is None else check_tolerance(self.tol)
        try:
            cert = certify(problem)
        except ValueError:
            cert = None
        self.certificate_ = cert if isinstance(cert, DominanceCertificate) else None
        if quad:
            self.trace_ = run_quadratic(problem, x0, t_max=t_max, tol=tol)
        else:
            points = check_grid_points(self.grid_points)
            cap = check_grid_points(self.max_grid_points, "max_grid_points")
            check_scalar(self.margin, "margin", numbers.Real, min_val=1.0, include_boundaries="neither")
            self.trace_ = run_general(problem, x0, t_max=t_max, tol=tol, points=points, max_points=cap,
                                      margin=self.margin, certificate=self.certificate_, check=self.check)
        self.x_ = np.array(self.trace_.final)
        self.n_iter_ = self.trace_.n_iter
        self.converged_ = self.trace_.converged
        return self


class DominanceCertifier(BaseEstimator):
    """Find or check a scaled-dominance certificate.

    Without ``lam`` the best available certificate is computed (exact for
    quadratics, closed-form for builtin factor families).  With ``lam``
    (and optionally ``w``) the inequality is sampled on ``box``.
    """

    def __init__(self, lam=None, w=None, box=None, samples=4096, seed=0):
        self.lam = lam
        self.w = w
        self.box = box
        self.samples = samples
        self.seed = seed

    def fit(self, problem, y=None):
        problem = check_problem(problem)
        if self.lam is None:
            self.certificate_ = certify(problem)
        else:
            check_scalar(self.lam, "lam", numbers.Real, min_val=0.0, max_val=1.0, include_boundaries="left")
            check_scalar(self.samples, "samples", numbers.Integral, min_val=1)
            obj = problem.to_pairwise() if isinstance(problem, QuadraticProblem) else problem
            self.certificate_ = certify_general(obj, self.lam, self.w, self.box, self.samples, self.seed)
        self.certified_ = bool(self.certificate_.certified)
        return self
