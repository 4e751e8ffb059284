"""Parametric min-sum for quadratic problems.

Each directed-edge message is ``J(x) = alpha x^2 / 2 - beta x`` (no constant,
so ``J(0) = 0``).  Updates are synchronous over all 2|E| directed edges.

Indexing: the state with index ``t`` holds messages ``J^(t)`` and the
estimate ``x^(t)`` that was computed from ``J^(t-1)``.  The initial state
(``t = 0``) holds ``J^(0)`` and ``x^(0) = x0``.  A trace row ``t`` is
therefore the estimate after ``t - 1`` message updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import QuadraticProblem


class WellPosednessError(ArithmeticError):
    """A local minimisation lost strict convexity (``a_{i->j} <= 0``)."""

    def __init__(self, message: str, edge=None, node=None, value=None, t=None):
        super().__init__(message)
        self.edge = edge
        self.node = node
        self.value = value
        self.t = t


class DivergenceError(ArithmeticError):
    """Messages or estimates became non-finite."""


@dataclass(frozen=True)
class QuadraticMessageState:
    t: int
    alpha: np.ndarray
    beta: np.ndarray
    estimates: np.ndarray

    def message(self, q: QuadraticProblem, i: int, j: int) -> tuple[float, float]:
        e = q.graph.directed_index(i, j)
        return float(self.alpha[e]), float(self.beta[e])


def _directed_coef(q: QuadraticProblem) -> np.ndarray:
    # a_ji for directed edge i -> j; A symmetric so a_ji == a_ij
    return np.repeat(q.edge_coef, 2)


def init_messages_quadratic(q: QuadraticProblem, x0=None, alpha0=None, beta0=None,
                            rho_check=None) -> QuadraticMessageState:
    """Initial messages.

    By default ``alpha = 0`` and ``beta_{i->j} = -a_ji x0_i``, i.e.
    ``J_{i->j}(x_j) = a_ji x_j x0_i``.  Explicit ``alpha0``/``beta0`` arrays
    (indexed by directed edge) override this; with ``rho_check = (rho, lam, w)``
    every ``alpha0_{i->j} >= -rho (w_i / w_j) |a_ji|`` is enforced.
    """
    n = q.n
    m2 = 2 * q.graph.n_edges
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({n},)")
    src, dst = q.graph.directed
    coef = _directed_coef(q)
    alpha = np.zeros(m2) if alpha0 is None else np.array(alpha0, dtype=float)
    beta = -coef * x0[src] if beta0 is None else np.array(beta0, dtype=float)
    if alpha.shape != (m2,) or beta.shape != (m2,):
        raise ValueError(f"initial alpha/beta must have one entry per directed edge ({m2})")
    if rho_check is not None:
        rho, lam, w = rho_check
        w = np.asarray(w, dtype=float)
        if not 0 <= rho < (np.inf if lam == 0 else 1.0 / lam):
            raise ValueError(f"rho={rho} must lie in [0, 1/lambda)")
        floor = -rho * w[src] / w[dst] * np.abs(coef)
        bad = np.flatnonzero(alpha < floor - 1e-12 * np.abs(floor))
        if bad.size:
            e = bad[0]
            raise ValueError(
                f"initial alpha on {src[e]}->{dst[e]} is {alpha[e]:.6g}, below the admissible floor {floor[e]:.6g}"
            )
    return QuadraticMessageState(0, alpha, beta, x0.copy())


def _incoming_sums(q: QuadraticProblem, s: QuadraticMessageState):
    _, dst = q.graph.directed
    in_alpha = np.bincount(dst, weights=s.alpha, minlength=q.n)
    in_beta = np.bincount(dst, weights=s.beta, minlength=q.n)
    return in_alpha, in_beta


def cavity_coefficients(q: QuadraticProblem, s: QuadraticMessageState) -> tuple[np.ndarray, np.ndarray]:
    """``a_{i->j}`` and ``b_{i->j}`` for every directed edge: node terms plus all incoming messages except from j."""
    src, _ = q.graph.directed
    rev = q.graph.reverse
    in_alpha, in_beta = _incoming_sums(q, s)
    a = q.diag[src] + in_alpha[src] - s.alpha[rev]
    b = q.b[src] + in_beta[src] - s.beta[rev]
    return a, b


def estimate_from_messages(q: QuadraticProblem, s: QuadraticMessageState) -> np.ndarray:
    """Minimiser of each local objective ``f_i + sum_u J_{u->i}`` built from the messages in ``s``."""
    in_alpha, in_beta = _incoming_sums(q, s)
    curv = q.diag + in_alpha
    bad = np.flatnonzero(~(curv > 0))
    if bad.size:
        i = int(bad[0])
        raise WellPosednessError(
            f"local objective at node {i} is not strictly convex (curvature {curv[i]:.6g}) at t={s.t}",
            node=i, value=float(curv[i]), t=s.t,
        )
    return (q.b + in_beta) / curv


def update_messages_quadratic(q: QuadraticProblem, s: QuadraticMessageState) -> QuadraticMessageState:
    """One synchronous update; the input state is not modified."""
    a, b = cavity_coefficients(q, s)
    bad = np.flatnonzero(~(a > 0))
    if bad.size:
        src, dst = q.graph.directed
        e = int(bad[0])
        raise WellPosednessError(
            f"a_{{{src[e]}->{dst[e]}}} = {a[e]:.6g} <= 0 at t={s.t}: the dominance assumption does not hold",
            edge=(int(src[e]), int(dst[e])), value=float(a[e]), t=s.t,
        )
    coef = _directed_coef(q)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        alpha = -coef * coef / a
        beta = -coef * b / a
        x = estimate_from_messages(q, s)
    if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta)) and np.all(np.isfinite(x))):
        raise DivergenceError(f"non-finite messages or estimates after update at t={s.t}")
    return QuadraticMessageState(s.t + 1, alpha, beta, x)


def p3_violations(q: QuadraticProblem, s: QuadraticMessageState, lam: float, w, rtol: float = 1e-12) -> list:
    """Directed edges where ``alpha < 0`` or ``lam w_i a_{i->j} >= w_j |a_ji| > 0`` fails.

    The sign condition on ``alpha`` is only checked for ``t >= 1``.
    """
    w = np.asarray(w, dtype=float)
    src, dst = q.graph.directed
    coef = np.abs(_directed_coef(q))
    a, _ = cavity_coefficients(q, s)
    lhs = lam * w[src] * a
    rhs = w[dst] * coef
    out = []
    for e in np.flatnonzero(~(lhs >= rhs * (1 - rtol)) | ~(rhs > 0)):
        out.append(("dominance", int(src[e]), int(dst[e]), float(lhs[e]), float(rhs[e])))
    if s.t >= 1:
        for e in np.flatnonzero(~(s.alpha < 0)):
            out.append(("alpha_sign", int(src[e]), int(dst[e]), float(s.alpha[e]), 0.0))
    return out


@dataclass
class Trace:
    """Per-iteration record.  Row ``t`` holds ``x^(t)``; row 0 is ``x0``."""

    t: np.ndarray
    x: np.ndarray
    step_inf: np.ndarray
    residual_inf: np.ndarray
    grid_points: np.ndarray | None = None
    converged: bool = False
    states: list | None = None

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]

    @property
    def n_iter(self) -> int:
        return int(self.t[-1])

    def __len__(self) -> int:
        return len(self.t)


def run_quadratic(q: QuadraticProblem, x0=None, t_max: int = 200, tol: float = 1e-10,
                  state: QuadraticMessageState | None = None, keep_states: bool = False) -> Trace:
    """Iterate until ``max_i |x_i^(t) - x_i^(t-1)| <= tol`` or ``t == t_max``."""
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be > 0")
    s = init_messages_quadratic(q, x0) if state is None else state
    ts = [s.t]
    xs = [s.estimates]
    steps = [np.nan]
    res = [q.residual_inf(s.estimates)]
    states = [s] if keep_states else None
    converged = False
    while s.t < t_max:
        new = update_messages_quadratic(q, s)
        step = float(np.max(np.abs(new.estimates - s.estimates), initial=0.0))
        s = new
        ts.append(s.t)
        xs.append(s.estimates)
        steps.append(step)
        res.append(q.residual_inf(s.estimates))
        if keep_states:
            states.append(s)
        if step <= tol:
            converged = True
            break
    return Trace(np.array(ts), np.array(xs), np.array(steps), np.array(res),
                 converged=converged, states=states)
