"""Scaled diagonal dominance: certificates, refutations and margins.

For a quadratic problem the smallest feasible ``lambda`` over positive
scalings ``w`` is the spectral radius of ``B = D^-1 |A_off|``, attained at the
Perron vector.  We run power iteration on the symmetric similar matrix
``D^-1/2 |A_off| D^-1/2`` per connected component and stop on the
Collatz-Wielandt bracket, so the returned ``(lambda, w)`` satisfies the
row inequalities by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.stats import qmc

from .problem import PairwiseObjective, QuadraticProblem

MAX_POWER_ITER = 10_000
RQ_TOL = 1e-13
BRACKET_RTOL = 1e-12
CERT_RTOL = 1e-12


class CertificationError(RuntimeError):
    """Power iteration did not settle: neither a certificate nor a refutation."""


@dataclass(frozen=True)
class DominanceCertificate:
    lam: float
    w: np.ndarray
    kind: str = "exact_quadratic"
    sample_count: int = 0
    box: tuple | None = None

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "w", w)
        if not np.all(w > 0):
            raise ValueError("certificate weights must be positive")
        if not 0 <= self.lam < 1:
            raise ValueError(f"certificate lambda must lie in [0, 1), got {self.lam}")

    @property
    def certified(self) -> bool:
        return True


@dataclass(frozen=True)
class DominanceRefutation:
    """Best achievable ``lambda_star >= 1`` (quadratic), or a violating sample (sampled)."""

    lambda_star: float | None = None
    witness: np.ndarray | None = None
    row: int | None = None
    w: np.ndarray | None = field(default=None, repr=False)

    @property
    def certified(self) -> bool:
        return False


@dataclass(frozen=True)
class PerronResult:
    rho: float
    rho_upper: float
    w: np.ndarray
    iterations: int


def _perron_block(S: sp.csr_matrix) -> tuple[float, float, np.ndarray, int]:
    """Perron pair of an irreducible symmetric nonnegative matrix by shifted power iteration."""
    m = S.shape[0]
    rowsum = np.asarray(S.sum(axis=1)).ravel()
    shift = 0.5 * rowsum.max()
    v = np.ones(m) / np.sqrt(m)
    rq_old = np.inf
    for it in range(1, MAX_POWER_ITER + 1):
        Sv = S @ v
        rq = float(v @ Sv)
        ratios = Sv / v
        lo, hi = ratios.min(), ratios.max()
        if abs(rq - rq_old) < RQ_TOL * max(1.0, abs(rq)) and hi - lo <= BRACKET_RTOL * max(hi, 1e-300):
            return rq, float(hi), v, it
        rq_old = rq
        u = Sv + shift * v
        v = u / np.linalg.norm(u)
    raise CertificationError(
        f"power iteration did not converge in {MAX_POWER_ITER} iterations "
        f"(spectral radius bracketed in [{lo:.6g}, {hi:.6g}])"
    )


def perron_scaling(q: QuadraticProblem) -> PerronResult:
    """Spectral radius of ``D^-1 |A_off|`` and its positive Perron vector (max entry 1 per component)."""
    n = q.n
    d = q.diag
    if q.graph.n_edges == 0:
        return PerronResult(0.0, 0.0, np.ones(n), 0)
    absoff = abs(q.A - sp.diags(d)).tocsr()
    absoff.eliminate_zeros()
    s = 1.0 / np.sqrt(d)
    S = sp.diags(s) @ absoff @ sp.diags(s)
    S = sp.csr_matrix(S)
    w = np.ones(n)
    rho = rho_up = 0.0
    iters = 0
    for comp in q.graph.components():
        if comp.size == 1:
            continue
        block = S[comp][:, comp]
        r, r_up, v, it = _perron_block(block)
        wc = v * s[comp]
        w[comp] = wc / wc.max()
        rho = max(rho, r)
        rho_up = max(rho_up, r_up)
        iters = max(iters, it)
    return PerronResult(rho, rho_up, w, iters)


def certify_quadratic(q: QuadraticProblem):
    """Tight ``(lambda, w)`` certificate for a quadratic problem, or a refutation with ``lambda_star``."""
    res = perron_scaling(q)
    if res.rho_upper < 1.0:
        # Collatz-Wielandt upper bound: certifies every row with this w
        return DominanceCertificate(res.rho_upper, res.w, kind="exact_quadratic")
    return DominanceRefutation(lambda_star=res.rho, w=res.w)


def dominance_margin(q: QuadraticProblem, lam: float, w) -> np.ndarray:
    """Per-row slack ``lam w_i a_ii - sum_j w_j |a_ij|``; valid iff all are nonnegative."""
    w = np.asarray(w, dtype=float)
    if w.shape != (q.n,) or not np.all(w > 0):
        raise ValueError("w must be a positive vector of length n")
    absoff = abs(q.A - sp.diags(q.diag))
    return lam * w * q.diag - absoff @ w


def check_certificate(q: QuadraticProblem, cert: DominanceCertificate, rtol: float = CERT_RTOL) -> bool:
    """Re-check the dominance inequality row by row."""
    margin = dominance_margin(q, cert.lam, cert.w)
    return bool(np.all(margin >= -rtol * cert.lam * cert.w * q.diag - 1e-300))


def certify_closed_form(obj: PairwiseObjective):
    """Global certificate from closed-form factor extrema, or ``None`` if some factor has none.

    Uses ``|d12 f_ij| <= sup |d12 f_ij|`` and ``d^2F/dx_i^2 >= inf``; the
    bound matrix is then treated like ``D^-1 |A_off|``.
    """
    rng = obj.diagonal_curvature_range()
    coup = obj.coupling_sup()
    if rng is None or coup is None:
        return None
    lo = rng[0]
    if not np.all(lo > 0):
        return DominanceRefutation(lambda_star=np.inf)
    edges = obj.graph.edges
    rows = [i for i, j in edges]
    cols = [j for i, j in edges]
    A = sp.csr_matrix((np.r_[lo, -coup], (np.r_[np.arange(obj.n), rows], np.r_[np.arange(obj.n), cols])),
                      shape=(obj.n, obj.n))
    A = A + sp.triu(A, k=1).T
    bound = QuadraticProblem(A, np.zeros(obj.n))
    out = certify_quadratic(bound)
    if isinstance(out, DominanceCertificate):
        return DominanceCertificate(out.lam, out.w, kind="closed_form")
    return out


def sample_points(obj: PairwiseObjective, box, samples: int, seed: int = 0) -> np.ndarray:
    """Box centre, each edge's 2-D slice corners (others at the centre), then scrambled Sobol points."""
    lo, hi = _box_arrays(box, obj.n)
    center = 0.5 * (lo + hi)
    pts = [center]
    for i, j in obj.graph.edges:
        for ci in (lo[i], hi[i]):
            for cj in (lo[j], hi[j]):
                p = center.copy()
                p[i], p[j] = ci, cj
                pts.append(p)
    sob = qmc.Sobol(d=obj.n, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(samples, 1))))
    u = sob.random_base2(m)[:samples]
    pts.extend(qmc.scale(u, lo, hi) if obj.n > 0 else u)
    return np.vstack(pts)


def _box_arrays(box, n: int):
    if box is None:
        box = (-10.0, 10.0)
    box = np.asarray(box, dtype=float)
    if box.shape == (2,):
        lo, hi = np.full(n, box[0]), np.full(n, box[1])
    elif box.shape == (n, 2):
        lo, hi = box[:, 0].copy(), box[:, 1].copy()
    else:
        raise ValueError(f"box must be (lo, hi) or an (n, 2) array, got shape {box.shape}")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
        raise ValueError("box must be finite with lo < hi")
    return lo, hi


def row_slack(obj: PairwiseObjective, X: np.ndarray, lam: float, w) -> np.ndarray:
    """``lam w_i d^2F/dx_i^2 - sum_j w_j |d^2F/dx_i dx_j|`` at each row of ``X``; shape ``(S, n)``."""
    w = np.asarray(w, dtype=float)
    diag = obj.diagonal_hessian(X)
    lhs = np.zeros_like(diag)
    for (i, j), f in zip(obj.graph.edges, obj.edge_factors):
        c = np.abs(f.d12(X[:, i], X[:, j]))
        lhs[:, i] += w[j] * c
        lhs[:, j] += w[i] * c
    if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(lhs))):
        bad = np.flatnonzero(~np.all(np.isfinite(diag) & np.isfinite(lhs), axis=1))[0]
        raise FloatingPointError(f"non-finite second derivative at sample point {X[bad]}")
    return lam * w * diag - lhs


def certify_general(obj: PairwiseObjective, lam: float, w=None, box=None, samples: int = 4096, seed: int = 0):
    """Sampled check of the dominance inequality on a finite box.

    This is evidence, not proof: the inequality is only tested at the
    sample points.  Returns a ``sampled`` certificate or a refutation
    carrying the first violating point and row.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    w = np.ones(obj.n) if w is None else np.asarray(w, dtype=float)
    if w.shape != (obj.n,) or not np.all(w > 0):
        raise ValueError("w must be a positive vector of length n")
    X = sample_points(obj, box, samples, seed)
    slack = row_slack(obj, X, lam, w)
    diag = obj.diagonal_hessian(X)
    tol = CERT_RTOL * np.abs(lam * w * diag)
    bad = slack < -tol
    if bad.any():
        k = int(np.flatnonzero(bad.any(axis=1))[0])
        row = int(np.flatnonzero(bad[k])[0])
        return DominanceRefutation(witness=X[k].copy(), row=row, w=w)
    lo, hi = _box_arrays(box, obj.n)
    return DominanceCertificate(lam, w, kind="sampled", sample_count=X.shape[0],
                                box=tuple(zip(lo.tolist(), hi.tolist())))


def certify(problem, box=None, samples: int = 4096, seed: int = 0):
    """Best available certificate: exact for quadratics, closed form for builtin families, else sampled."""
    if isinstance(problem, QuadraticProblem):
        return certify_quadratic(problem)
    cf = certify_closed_form(problem)
    if cf is not None:
        return cf
    raise ValueError("no closed-form bounds for these factors; call certify_general with (lambda, w)")
