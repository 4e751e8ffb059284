"""Convergence-rate bounds and their comparison with measured traces.

Bounds are functions of ``k``, the number of completed message updates.
The estimate built from ``J^(k)`` sits in trace row ``k + 1``, so
:func:`check_trace` compares row ``t >= 1`` with the bound at ``k = t - 1``.

Kinds:

``general``
    ``lam^k / (1 - lam) * max_i sum_u |d1 f_iu(x*_i, x*_u) - J0'_{u->i}(x*_i)| / (w_i m_i)``
    with ``m_i = inf d^2F/dx_i^2``; any initial messages.
``general_simplified``
    ``lam^(k+1) M / (1 - lam) * max_v |x0_v - x*_v| / w_v`` for the default
    ``x0`` initialisation; ``M = max_i sup/inf d^2F/dx_i^2``.
``quadratic``
    the ``general`` bound written for ``(alpha0, beta0)`` initial messages.
``quadratic_simplified``
    ``general_simplified`` with ``M = 1``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dominance import DominanceCertificate, _box_arrays, certify, sample_points
from .problem import QuadraticProblem, quadratic_to_pairwise
from .reference import exact_minimiser

BOUND_KINDS = ("general", "general_simplified", "quadratic", "quadratic_simplified")
SATISFIED_RTOL = 1e-9
# measured errors cannot go below rounding in x and x*: a few ulps of |x*|/w
ROUNDING_ULPS = 16


class BoundInapplicableError(ValueError):
    """The requested bound has no finite value for this problem or initialisation."""


def curvature_extrema(problem, box=None, samples: int = 4096, seed: int = 0):
    """Per-node ``(inf, sup)`` of ``d^2F/dx_i^2`` and the box used (``None`` when closed-form).

    Builtin families use closed forms over all of R^n.  Otherwise the
    extrema are taken over sample points of ``box`` (default ``[-10, 10]^n``)
    and only hold on that box.
    """
    if isinstance(problem, QuadraticProblem):
        return problem.diag.copy(), problem.diag.copy(), None
    rng = problem.diagonal_curvature_range()
    if rng is not None:
        return rng[0], rng[1], None
    X = sample_points(problem, box, samples, seed)
    d = problem.diagonal_hessian(X)
    lo, hi = _box_arrays(box, problem.n)
    return d.min(axis=0), d.max(axis=0), tuple(zip(lo.tolist(), hi.tolist()))


def conditioning_value(problem, box=None, samples: int = 4096, seed: int = 0) -> tuple[float, tuple | None]:
    """``M = max_i sup_x d^2F/dx_i^2 / inf_x d^2F/dx_i^2`` (``inf`` for unbounded curvature)."""
    if isinstance(problem, QuadraticProblem):
        return 1.0, None
    lo, hi, used = curvature_extrema(problem, box, samples, seed)
    if not np.all(lo > 0):
        raise BoundInapplicableError("diagonal curvature is not bounded away from zero")
    return max(1.0, float(np.max(hi / lo))), used


def _check_cert(cert, n):
    if not isinstance(cert, DominanceCertificate):
        raise BoundInapplicableError("bounds need a valid dominance certificate")
    if cert.w.shape != (n,):
        raise ValueError("certificate size does not match the problem")


def _check_k(k):
    if k < 0:
        raise ValueError("iteration count must be >= 0")


def general_numerator(problem, cert, x_star, x0=None, initial=None, box=None) -> tuple[float, tuple | None]:
    """``max_i sum_u |d1 f_iu(x*_i, x*_u) - J0'_{u->i}(x*_i)| / (w_i m_i)``.

    ``initial`` maps ``(u, i)`` to a scalar factor overriding the default
    ``J0_{u->i} = f_iu(., x0_u)``.
    """
    obj = quadratic_to_pairwise(problem) if isinstance(problem, QuadraticProblem) else problem
    _check_cert(cert, obj.n)
    x_star = np.asarray(x_star, dtype=float)
    x0 = np.zeros(obj.n) if x0 is None else np.asarray(x0, dtype=float)
    initial = initial or {}
    m, _, used = curvature_extrema(problem, box)
    if not np.all(m > 0):
        i = int(np.flatnonzero(~(m > 0))[0])
        raise BoundInapplicableError(f"minimum curvature at node {i} is {m[i]:.6g}: zero denominator")
    num = np.zeros(obj.n)
    for i in range(obj.n):
        for u in obj.graph.neighbors[i]:
            f = obj.oriented(i, u)
            if (u, i) in initial:
                g0 = float(initial[(u, i)].grad(x_star[i]))
            else:
                g0 = float(f.d1(x_star[i], x0[u]))
            num[i] += abs(float(f.d1(x_star[i], x_star[u])) - g0)
    return float(np.max(num / (cert.w * m), initial=0.0)), used


def bound_general(problem, cert: DominanceCertificate, x_star, k: int, x0=None, initial=None, box=None) -> float:
    _check_k(k)
    c, _ = general_numerator(problem, cert, x_star, x0, initial, box)
    return cert.lam ** k / (1 - cert.lam) * c


def quadratic_numerator(q: QuadraticProblem, cert, x_star, alpha0=None, beta0=None, x0=None) -> float:
    """``max_i sum_u |a_iu x*_u - alpha0_{u->i} x*_i + beta0_{u->i}| / (w_i a_ii)``."""
    _check_cert(cert, q.n)
    x_star = np.asarray(x_star, dtype=float)
    src, dst = q.graph.directed
    coef = np.repeat(q.edge_coef, 2)
    x0 = np.zeros(q.n) if x0 is None else np.asarray(x0, dtype=float)
    alpha0 = np.zeros(src.size) if alpha0 is None else np.asarray(alpha0, dtype=float)
    beta0 = -coef * x0[src] if beta0 is None else np.asarray(beta0, dtype=float)
    # directed edge e is u -> i with u = src, i = dst
    terms = np.abs(coef * x_star[src] - alpha0 * x_star[dst] + beta0)
    num = np.bincount(dst, weights=terms, minlength=q.n)
    return float(np.max(num / (cert.w * q.diag), initial=0.0))


def bound_quadratic(q: QuadraticProblem, cert: DominanceCertificate, x_star, k: int,
                    alpha0=None, beta0=None, x0=None) -> float:
    _check_k(k)
    return cert.lam ** k / (1 - cert.lam) * quadratic_numerator(q, cert, x_star, alpha0, beta0, x0)


def bound_simplified(problem, cert: DominanceCertificate, x0, x_star, k: int, box=None) -> float:
    """``lam^(k+1) M / (1 - lam) * max_v |x0_v - x*_v| / w_v``; raises if ``M`` is infinite."""
    _check_k(k)
    _check_cert(cert, problem.n)
    M, _ = conditioning_value(problem, box)
    if not np.isfinite(M):
        raise BoundInapplicableError("conditioning value M is infinite (unbounded curvature); use the general bound")
    x0 = np.zeros(problem.n) if x0 is None else np.asarray(x0, dtype=float)
    d = float(np.max(np.abs(x0 - np.asarray(x_star)) / cert.w, initial=0.0))
    return cert.lam ** (k + 1) * M / (1 - cert.lam) * d


@dataclass
class BoundReport:
    kind: str
    lam: float
    w: np.ndarray
    M: float | None
    t: np.ndarray
    measured: np.ndarray
    bound: np.ndarray
    satisfied: np.ndarray
    box: tuple | None = None
    x_star: np.ndarray | None = field(default=None, repr=False)
    floor: float = 0.0

    @property
    def all_satisfied(self) -> bool:
        return bool(np.all(self.satisfied))

    @property
    def violations(self) -> np.ndarray:
        return self.t[~self.satisfied]

    def summary(self) -> str:
        verdict = "satisfied" if self.all_satisfied else f"VIOLATED at t={self.violations.tolist()}"
        m = "" if self.M is None else f" M={self.M:.6g}"
        box = "" if self.box is None else " (curvature extrema restricted to the sampled box)"
        return (f"{self.kind} bound {verdict} on {self.t.size} rows; lambda={self.lam:.6g}{m}"
                f" rounding floor={self.floor:.3g}{box}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t", "err_weighted", "bound_value", "satisfied"])
        for row in zip(self.t.tolist(), self.measured.tolist(), self.bound.tolist(), self.satisfied.tolist()):
            wr.writerow([row[0], repr(row[1]), repr(row[2]), int(row[3])])
        return buf.getvalue()


def weighted_error(x, x_star, w) -> np.ndarray:
    """``max_r |x_r - x*_r| / w_r`` for each row of ``x``."""
    return np.max(np.abs(np.atleast_2d(x) - x_star) / w, axis=-1)


def rounding_floor(x_star, w) -> float:
    return ROUNDING_ULPS * np.finfo(float).eps * float(np.max(np.abs(x_star) / w, initial=0.0))


def check_trace(trace, problem, kind: str | None = None, cert: DominanceCertificate | None = None,
                x_star=None, x0=None, initial=None, alpha0=None, beta0=None, box=None,
                floor: float | None = None) -> BoundReport:
    """Evaluate a bound at every trace row ``t >= 1`` (``k = t - 1``) and flag violations.

    ``x_star`` defaults to the reference solver's answer, ``x0`` to trace row 0
    and ``cert`` to the best available certificate.  A row is satisfied when
    ``measured <= bound (1 + 1e-9) + floor``; the default ``floor`` is 16 ulps
    of ``max |x*| / w``, below which errors are pure rounding.  Pass
    ``floor=0`` for the bare comparison.
    """
    is_q = isinstance(problem, QuadraticProblem)
    if kind is None:
        kind = "quadratic_simplified" if is_q else "general"
    if kind not in BOUND_KINDS:
        raise ValueError(f"unknown bound kind {kind!r}; choose from {', '.join(BOUND_KINDS)}")
    if kind.startswith("quadratic") and not is_q:
        raise BoundInapplicableError(f"{kind} bound needs a quadratic problem")
    if cert is None:
        cert = certify(problem)
    _check_cert(cert, problem.n)
    x_star = exact_minimiser(problem) if x_star is None else np.asarray(x_star, dtype=float)
    x0 = np.asarray(trace.x[0] if x0 is None else x0, dtype=float)
    custom_init = initial is not None or alpha0 is not None or beta0 is not None
    M = used = None
    if kind == "general":
        if alpha0 is not None or beta0 is not None:
            raise ValueError("alpha0/beta0 apply to the quadratic kind")
        c, used = general_numerator(problem, cert, x_star, x0, initial, box)
        base = c / (1 - cert.lam)
    elif kind == "quadratic":
        if initial is not None:
            raise ValueError("use alpha0/beta0 for the quadratic kind")
        base = quadratic_numerator(problem, cert, x_star, alpha0, beta0, x0) / (1 - cert.lam)
    else:
        if custom_init:
            raise BoundInapplicableError(f"{kind} bound only covers the default x0 initialisation")
        M, used = conditioning_value(problem, box) if kind == "general_simplified" else (1.0, None)
        if not np.isfinite(M):
            raise BoundInapplicableError("conditioning value M is infinite (unbounded curvature); use the general bound")
        d = float(np.max(np.abs(x0 - x_star) / cert.w, initial=0.0))
        base = cert.lam * M / (1 - cert.lam) * d
    rows = np.flatnonzero(np.asarray(trace.t) >= 1)
    t = np.asarray(trace.t)[rows]
    measured = weighted_error(trace.x[rows], x_star, cert.w)
    bound = base * cert.lam ** (t - 1).astype(float)
    floor = rounding_floor(x_star, cert.w) if floor is None else float(floor)
    satisfied = measured <= bound * (1 + SATISFIED_RTOL) + floor
    return BoundReport(kind, cert.lam, cert.w, M, t, measured, bound, satisfied, used, x_star, floor)
