"""Min-sum for general pairwise objectives with messages sampled on grids.

A message ``J_{i->j}`` lives on node j's grid and is interpolated by a
not-a-knot cubic spline.  The partial minimisation over ``y_i`` is solved
for every grid point ``x_j`` at once: a coarse scan of the grid brackets the
minimiser (valid by strict convexity in ``y_i``), golden-section search
narrows the bracket, and a safeguarded Newton step polishes it on the
interpolant.  Indexing of states and traces matches :mod:`minsum.quadratic`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .dominance import DominanceCertificate, certify_closed_form
from .factors import ScalarFactor
from .problem import PairwiseObjective, QuadraticProblem, quadratic_to_pairwise
from .quadratic import DivergenceError, Trace, WellPosednessError

DEFAULT_POINTS = 1025
MAX_POINTS = 4097
GOLDEN_ITERS = 24
NEWTON_ITERS = 60
GRAD_TOL = 1e-10
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class BoundaryMinimiserError(RuntimeError):
    """A partial minimiser sits on the edge of its grid: the domain is too small."""

    def __init__(self, message, node=None, edge=None, at=None):
        super().__init__(message)
        self.node = node
        self.edge = edge
        self.at = at


class DomainError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridDomain:
    """Uniform grid ``h * (offset + k)``, ``k = 0..points-1``; node ``-offset`` is exactly 0."""

    h: float
    offset: int
    points: int

    def __post_init__(self):
        p = self.points
        if p < 65 or (p - 1) & (p - 2):
            raise ValueError(f"grid points must be 2^k + 1 and >= 65, got {p}")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if not (self.offset < 0 < self.offset + p - 1):
            raise ValueError("grid must contain 0 strictly inside")

    @classmethod
    def covering(cls, lo: float, hi: float, points: int = DEFAULT_POINTS) -> "GridDomain":
        """Smallest grid of this size containing ``[lo, hi]`` and 0, with 0 on a node."""
        lo, hi = min(lo, 0.0), max(hi, 0.0)
        span = hi - lo
        if not span > 0:
            raise ValueError("empty interval")
        h = span / (points - 2)
        offset = math.floor(lo / h)
        if offset >= 0:
            offset = -1
        while h * (offset + points - 1) <= 0 or h * (offset + points - 1) < hi:
            h *= 1.0 + 1e-12
            offset = min(math.floor(lo / h), -1)
        return cls(h, offset, points)

    @property
    def lo(self) -> float:
        return self.h * self.offset

    @property
    def hi(self) -> float:
        return self.h * (self.offset + self.points - 1)

    @property
    def zero_index(self) -> int:
        return -self.offset

    @property
    def nodes(self) -> np.ndarray:
        return self.h * (self.offset + np.arange(self.points))

    def refined(self) -> "GridDomain":
        return GridDomain(self.h / 2, 2 * self.offset, 2 * self.points - 1)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class GridMessage:
    """Sampled message with its minimiser map and the curvature ``a_{i->j}`` at the minimiser."""

    domain: GridDomain
    values: np.ndarray
    minimiser: np.ndarray
    curvature: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.domain.points,):
            raise ValueError("message values do not match the grid")
        if not np.all(np.isfinite(self.values)):
            raise DivergenceError("non-finite message values")

    def spline(self) -> CubicSpline:
        return CubicSpline(self.domain.nodes, self.values)

    def __call__(self, x):
        return self.spline()(x)

    def resampled(self, domain: GridDomain) -> "GridMessage":
        x = domain.nodes
        src = self.domain.nodes
        vals = CubicSpline(src, self.values)(x)
        vals[domain.zero_index] = 0.0
        mins = CubicSpline(src, self.minimiser)(x) if np.all(np.isfinite(self.minimiser)) else np.full(x.shape, np.nan)
        curv = CubicSpline(src, self.curvature)(x) if np.all(np.isfinite(self.curvature)) else np.full(x.shape, np.nan)
        return GridMessage(domain, vals, mins, curv)


@dataclass(frozen=True)
class GeneralMessageState:
    t: int
    messages: tuple
    estimates: np.ndarray
    domains: tuple
    incoming: tuple = field(default=(), repr=False)

    @property
    def points(self) -> int:
        return self.domains[0].points


# ---------------------------------------------------------------------------
# domains


def choose_domains(obj: PairwiseObjective, x0=None, margin: float = 2.0, points: int = DEFAULT_POINTS) -> tuple:
    """Per-node grids containing ``x0``, 0, every estimate and every partial minimiser met while iterating.

    With closed-form curvature and coupling bounds, a comparison model gives
    half-widths ``H``: curvature floors of every cavity function follow the
    quadratic recursion ``a = lo_i - sum c^2 / a`` on the bound matrix,
    minimiser maps have slope at most ``c / a``, and the minimiser at
    ``x_j = 0`` is bounded by the cavity gradient at 0 over its curvature
    floor.  ``H`` is the smallest vector closed under these maps, widened by
    ``margin``.  Otherwise a doubling search on each coordinate slice
    brackets the minimiser.
    """
    if not margin > 1:
        raise ValueError("margin must be > 1")
    obj = quadratic_to_pairwise(obj) if isinstance(obj, QuadraticProblem) else obj
    x0 = np.zeros(obj.n) if x0 is None else np.asarray(x0, dtype=float)
    H = _comparison_half_widths(obj, x0)
    if H is None:
        return tuple(_doubling_domain(obj, x0, i, margin, points) for i in range(obj.n))
    return tuple(GridDomain.covering(-margin * h, margin * h, points) for h in H)


def _comparison_half_widths(obj: PairwiseObjective, x0, max_iter: int = 10_000):
    rng = obj.diagonal_curvature_range()
    coup = obj.coupling_sup()
    if rng is None or coup is None or not np.all(rng[0] > 0):
        return None
    lo = rng[0]
    src, dst = obj.graph.directed
    rev = obj.graph.reverse
    c = np.repeat(coup, 2)
    n = obj.n
    # curvature floors of the cavity functions; decreasing in t, so iterate to the limit
    alpha = np.zeros(src.size)
    a = lo[src].copy()
    for _ in range(max_iter):
        inc = np.bincount(dst, alpha, n)
        a = lo[src] + inc[src] - alpha[rev]
        if not np.all(a > 0):
            return None
        new = -c * c / a
        if np.all(np.abs(new - alpha) <= 1e-13 * np.abs(new) + 1e-300):
            break
        alpha = new
    else:
        return None
    a_node = lo + np.bincount(dst, alpha, n)
    if not np.all(a_node > 0):
        return None
    a *= 1 - 1e-9
    a_node *= 1 - 1e-9
    slope = c / a
    # |cavity gradient| at 0 not coming from neighbour minimisers
    g_node = np.array([abs(float(f.grad(0.0))) for f in obj.node_factors])
    g_edge = np.array([abs(float(obj.oriented(int(i), int(u)).d1(0.0, 0.0))) for u, i in zip(src, dst)])
    g_self = np.array([abs(float(obj.oriented(int(j), int(i)).d2(0.0, 0.0))) for i, j in zip(src, dst)])
    # Y[e] bounds |y*_{i->j}(0)| for e = i -> j; initial messages behave like minimisers at x0
    Y = np.abs(x0[src])
    Ymax = Y.copy()
    for _ in range(max_iter):
        inflow = g_edge + c * Y
        tot = np.bincount(dst, inflow, n)
        Y_new = (g_node[src] + g_self + tot[src] - inflow[rev]) / a
        Ymax = np.maximum(Ymax, Y_new)
        if np.all(np.abs(Y_new - Y) <= 1e-12 * (np.abs(Y_new) + 1e-300)):
            break
        Y = Y_new
    else:
        return None
    E = (g_node + np.bincount(dst, g_edge + c * Ymax, n)) / a_node
    H = np.maximum(E, np.abs(x0))
    for _ in range(max_iter):
        reach = np.zeros(n)
        np.maximum.at(reach, src, Ymax + slope * H[dst])
        H_new = np.maximum(H, reach)
        if np.all(H_new <= H * (1 + 1e-12)):
            break
        H = H_new
    else:
        return None
    floor = max(1e-3 * float(H.max(initial=0.0)), 1e-12)
    return np.where(H > floor, H, max(floor, 1.0 if H.max(initial=0.0) == 0 else floor))


def _doubling_domain(obj: PairwiseObjective, x0, i: int, margin: float, points: int) -> GridDomain:
    def slope(v):
        x = x0.copy()
        x[i] = v
        return obj.gradient(x)[i]

    L = max(1.0, abs(x0[i]))
    for _ in range(60):
        if slope(-L) < 0 < slope(L):
            R = 2 * margin * L
            return GridDomain.covering(-R, R, points)
        L *= 2
    raise DomainError(f"could not bracket the minimiser of node {i} in 60 doublings; is the objective coercive?")


# ---------------------------------------------------------------------------
# vectorised 1-D minimisation


def _minimise(dom: GridDomain, svals: np.ndarray, node_f: ScalarFactor, edge_f=None, xs=None, label=None):
    """Minimise ``node_f(y) + S(y) [+ edge_f(x, y)]`` over ``y`` in ``dom`` for each ``x`` in ``xs``.

    ``S`` is the cubic interpolant of ``svals`` on ``dom``.  Returns the
    minimisers, values and second derivatives at the minimisers.
    """
    nodes = dom.nodes
    S = CubicSpline(nodes, svals)
    dS, d2S = S.derivative(1), S.derivative(2)
    xs = np.zeros(1) if xs is None else np.asarray(xs, dtype=float)

    if edge_f is None:
        def phi(y):
            return node_f.value(y) + S(y)

        def dphi(y):
            return node_f.grad(y) + dS(y)

        def d2phi(y):
            return node_f.hess(y) + d2S(y)
    else:
        def phi(y):
            return node_f.value(y) + S(y) + edge_f.value(xs, y)

        def dphi(y):
            return node_f.grad(y) + dS(y) + edge_f.d2(xs, y)

        def d2phi(y):
            return node_f.hess(y) + d2S(y) + edge_f.d22(xs, y)

    # coarse scan on grid nodes, where S is known exactly
    stride = max(1, (dom.points - 1) // 64)
    idx = np.arange(0, dom.points, stride)
    yc = nodes[idx]
    base = node_f.value(yc) + svals[idx]
    if edge_f is None:
        grid_vals = np.broadcast_to(base[:, None], (idx.size, xs.size))
    else:
        grid_vals = base[:, None] + edge_f.value(xs[None, :], yc[:, None])
    if not np.all(np.isfinite(grid_vals)):
        raise DivergenceError(f"non-finite local objective while minimising {label}")
    k = np.argmin(grid_vals, axis=0)
    a = yc[np.maximum(k - 1, 0)]
    b = yc[np.minimum(k + 1, idx.size - 1)]

    # golden-section narrowing
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = phi(c), phi(d)
    for _ in range(GOLDEN_ITERS):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        d_new = np.where(left, c, a + _INVPHI * (b - a))
        c_new = np.where(left, b - _INVPHI * (b - a), d)
        c, d = c_new, d_new
        fc = phi(c)
        fd = phi(d)
    y = 0.5 * (a + b)
    mid = y.copy()

    # safeguarded Newton polish on the interpolant's derivative
    done = np.zeros(y.shape, dtype=bool)
    for _ in range(NEWTON_ITERS):
        g = dphi(y)
        scale = np.abs(node_f.grad(y)) + np.abs(dS(y)) + 1.0
        if edge_f is not None:
            scale = scale + np.abs(edge_f.d2(xs, y))
        done = np.abs(g) <= GRAD_TOL * scale
        if done.all():
            break
        a = np.where(g < 0, np.maximum(a, y), a)
        b = np.where(g > 0, np.minimum(b, y), b)
        hcurv = d2phi(y)
        step = np.where(hcurv > 0, y - g / np.where(hcurv > 0, hcurv, 1.0), np.nan)
        ok = np.isfinite(step) & (step > a) & (step < b)
        y = np.where(done, y, np.where(ok, step, 0.5 * (a + b)))
    # oscillation guard: fall back to the golden-section midpoint
    y = np.where(done | (np.abs(dphi(y)) <= np.abs(dphi(mid))), y, mid)

    lo, hi = dom.lo, dom.hi
    tol_edge = 1e-9 * dom.h
    g = dphi(y)
    gscale = GRAD_TOL * (np.abs(node_f.grad(y)) + np.abs(dS(y)) + 1.0)
    at_lo = (y <= lo + tol_edge) & (g > gscale)
    at_hi = (y >= hi - tol_edge) & (g < -gscale)
    if at_lo.any() or at_hi.any():
        bad = int(np.flatnonzero(at_lo | at_hi)[0])
        side = "lower" if at_lo[bad] else "upper"
        raise BoundaryMinimiserError(
            f"minimiser for {label} hits the {side} end of its grid [{lo:.4g}, {hi:.4g}]"
            + ("" if edge_f is None else f" at x={xs[bad]:.6g}")
            + "; enlarge the domain margin",
            at=float(xs[bad]),
        )
    vals = phi(y)
    curv = d2phi(y)
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(curv))):
        raise DivergenceError(f"non-finite interpolant while minimising {label}")
    return y, vals, curv


# ---------------------------------------------------------------------------
# messages


def _incoming_totals(obj: PairwiseObjective, messages, domains) -> tuple:
    totals = [np.zeros(d.points) for d in domains]
    src, dst = obj.graph.directed
    for e, msg in enumerate(messages):
        totals[dst[e]] = totals[dst[e]] + msg.values
    return tuple(totals)


def init_messages_general(obj: PairwiseObjective, x0=None, domains=None, initial=None,
                          margin: float = 2.0, points: int = DEFAULT_POINTS) -> GeneralMessageState:
    """Initial state.  Default ``J_{i->j}(x_j) = f_ji(x_j, x0_i)``, normalised to vanish at 0.

    ``initial`` may map a directed edge ``(i, j)`` to any :class:`ScalarFactor`
    to override that message; the caller is responsible for its admissibility.
    """
    obj = quadratic_to_pairwise(obj) if isinstance(obj, QuadraticProblem) else obj
    n = obj.n
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({n},)")
    if domains is None:
        domains = choose_domains(obj, x0, margin=margin, points=points)
    domains = tuple(domains)
    initial = initial or {}
    src, dst = obj.graph.directed
    messages = []
    for i, j in zip(src.tolist(), dst.tolist()):
        dom = domains[j]
        xj = dom.nodes
        if (i, j) in initial:
            vals = np.asarray(initial[(i, j)].value(xj), dtype=float)
        else:
            vals = obj.oriented(j, i).value(xj, x0[i])
        vals = vals - vals[dom.zero_index]
        messages.append(GridMessage(dom, vals, np.full(dom.points, x0[i]), np.full(dom.points, np.nan)))
    messages = tuple(messages)
    return GeneralMessageState(0, messages, x0.copy(), domains, _incoming_totals(obj, messages, domains))


def update_message_general(obj: PairwiseObjective, s: GeneralMessageState, i: int, j: int) -> GridMessage:
    """``J_{i->j}^(t+1)(x_j) = min_y f_i(y) + f_ji(x_j, y) + sum_{u != j} J_{u->i}^(t)(y)``, normalised at 0."""
    e_rev = obj.graph.directed_index(j, i)
    dom_i, dom_j = s.domains[i], s.domains[j]
    svals = s.incoming[i] - s.messages[e_rev].values
    xs = dom_j.nodes
    y, vals, curv = _minimise(dom_i, svals, obj.node_factors[i], obj.oriented(j, i), xs, label=f"message {i}->{j}")
    if not np.all(curv > 0):
        k = int(np.flatnonzero(~(curv > 0))[0])
        raise WellPosednessError(
            f"a_{{{i}->{j}}}({xs[k]:.6g}) = {curv[k]:.6g} <= 0 at t={s.t}", edge=(i, j), value=float(curv[k]), t=s.t
        )
    vals = vals - vals[dom_j.zero_index]
    return GridMessage(dom_j, vals, y, curv)


def local_objective_values(obj: PairwiseObjective, s: GeneralMessageState, i: int) -> np.ndarray:
    """``gamma_i = f_i + sum_u J_{u->i}`` on node i's grid."""
    return obj.node_factors[i].value(s.domains[i].nodes) + s.incoming[i]


def extract_estimate_general(obj: PairwiseObjective, s: GeneralMessageState, i: int) -> float:
    """Minimiser of ``f_i + sum_u J_{u->i}`` over node i's grid domain."""
    y, _, curv = _minimise(s.domains[i], s.incoming[i], obj.node_factors[i], label=f"local objective at node {i}")
    if not curv[0] > 0:
        raise WellPosednessError(f"local objective at node {i} not strictly convex at t={s.t}", node=i, t=s.t)
    return float(y[0])


def estimate_from_messages_general(obj: PairwiseObjective, s: GeneralMessageState) -> np.ndarray:
    return np.array([extract_estimate_general(obj, s, i) for i in range(obj.n)])


def update_messages_general(obj: PairwiseObjective, s: GeneralMessageState) -> GeneralMessageState:
    """One synchronous update of every directed edge plus the estimates from the old messages."""
    src, dst = obj.graph.directed
    messages = tuple(update_message_general(obj, s, i, j) for i, j in zip(src.tolist(), dst.tolist()))
    x = estimate_from_messages_general(obj, s)
    return GeneralMessageState(s.t + 1, messages, x, s.domains, _incoming_totals(obj, messages, s.domains))


def refine_state(obj: PairwiseObjective, s: GeneralMessageState) -> GeneralMessageState:
    """Same state on grids with twice the resolution."""
    domains = tuple(d.refined() for d in s.domains)
    messages = tuple(m.resampled(domains[dst]) for m, dst in zip(s.messages, obj.graph.directed[1].tolist()))
    return GeneralMessageState(s.t, messages, s.estimates, domains, _incoming_totals(obj, messages, domains))


# ---------------------------------------------------------------------------
# numerical checks of the well-posedness properties


def check_local_convexity(obj: PairwiseObjective, s: GeneralMessageState, slack: float | None = None) -> list:
    """Nodes whose local objective has a non-positive second difference somewhere inside its grid."""
    out = []
    for i in range(obj.n):
        h = s.domains[i].h
        tol = 10 * h * h if slack is None else slack
        g = local_objective_values(obj, s, i)
        d2 = (g[2:] - 2 * g[1:-1] + g[:-2]) / (h * h)
        if np.min(d2, initial=np.inf) <= -tol:
            k = int(np.argmin(d2))
            out.append(("local_convexity", i, float(s.domains[i].nodes[k + 1]), float(d2[k])))
    return out


def check_curvature_envelope(obj: PairwiseObjective, s: GeneralMessageState, lam: float, w, slack=None) -> list:
    """Messages whose second difference, minus ``d11 f_ji`` at the minimiser, leaves ``[-lam w_i/w_j |d12 f_ji|, 0]``."""
    w = np.asarray(w, dtype=float)
    out = []
    src, dst = obj.graph.directed
    for e, (i, j) in enumerate(zip(src.tolist(), dst.tolist())):
        msg = s.messages[e]
        if not np.all(np.isfinite(msg.minimiser)) or not np.all(np.isfinite(msg.curvature)):
            continue
        dom = msg.domain
        h = dom.h
        tol = 10 * h * h if slack is None else slack
        x = dom.nodes[1:-1]
        y = msg.minimiser[1:-1]
        f = obj.oriented(j, i)
        d2J = (msg.values[2:] - 2 * msg.values[1:-1] + msg.values[:-2]) / (h * h)
        excess = d2J - f.d11(x, y)
        floor = -lam * w[i] / w[j] * np.abs(f.d12(x, y))
        bad = (excess > tol) | (excess < floor - tol)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            out.append(("curvature_envelope", i, j, float(x[k]), float(excess[k]), float(floor[k])))
    return out


def check_minimiser_slope(obj: PairwiseObjective, s: GeneralMessageState, rel: float | None = None) -> list:
    """Messages whose minimiser map slope differs from ``-d12 f_ji / a_{i->j}`` by more than ``100 h^2`` relative."""
    out = []
    src, dst = obj.graph.directed
    for e, (i, j) in enumerate(zip(src.tolist(), dst.tolist())):
        msg = s.messages[e]
        if not np.all(np.isfinite(msg.curvature)):
            continue
        dom = msg.domain
        h = dom.h
        tol = 100 * h * h if rel is None else rel
        x = dom.nodes[1:-1]
        y = msg.minimiser[1:-1]
        fd = (msg.minimiser[2:] - msg.minimiser[:-2]) / (2 * h)
        exact = -obj.oriented(j, i).d12(x, y) / msg.curvature[1:-1]
        err = np.abs(fd - exact)
        bad = err > tol * np.maximum(np.abs(exact), 1e-300)
        bad &= err > 1e-12
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            out.append(("minimiser_slope", i, j, float(x[k]), float(fd[k]), float(exact[k])))
    return out


# ---------------------------------------------------------------------------
# driver


@dataclass
class GeneralTrace(Trace):
    violations: list = field(default_factory=list)
    final_state: GeneralMessageState | None = None


def _stalled(prev: float, step: float) -> bool:
    # a contracting iteration shrinks its step; a flat or growing step is grid noise
    return bool(np.isfinite(prev) and step >= prev)


def _gradient_inf(obj, x) -> float:
    return float(np.max(np.abs(obj.gradient(x)), initial=0.0))


def run_general(obj, x0=None, t_max: int = 200, tol: float = 1e-8, points: int = DEFAULT_POINTS,
                max_points: int = MAX_POINTS, margin: float = 2.0, certificate: DominanceCertificate | None = None,
                state: GeneralMessageState | None = None, check: bool = False, keep_states: bool = False,
                refine: bool = True, stall_window: int = 3) -> GeneralTrace:
    """Iterate grid min-sum until the successive-iterate step is ``<= tol`` or ``t == t_max``.

    When the step fails to shrink for ``stall_window`` consecutive iterations above ``tol``
    the grids are refined (doubling points) up to ``max_points``.  With
    ``check=True`` the convexity, curvature-envelope and minimiser-slope
    properties are checked at every iteration and collected in ``violations``.
    """
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be > 0")
    obj = quadratic_to_pairwise(obj) if isinstance(obj, QuadraticProblem) else obj
    cert = certificate if certificate is not None else certify_closed_form(obj)
    if not isinstance(cert, DominanceCertificate):
        cert = None
    s = state if state is not None else init_messages_general(obj, x0, margin=margin, points=points)
    ts, xs, steps, res, pts = [s.t], [s.estimates], [np.nan], [_gradient_inf(obj, s.estimates)], [s.points]
    states = [s] if keep_states else None
    violations = []
    converged = False
    stall = 0
    while s.t < t_max:
        new = update_messages_general(obj, s)
        step = float(np.max(np.abs(new.estimates - s.estimates), initial=0.0))
        if check:
            violations += [(new.t,) + v for v in check_local_convexity(obj, s)]
            if cert is not None:
                violations += [(new.t,) + v for v in check_curvature_envelope(obj, new, cert.lam, cert.w)]
            violations += [(new.t,) + v for v in check_minimiser_slope(obj, new)]
        prev = steps[-1]
        s = new
        ts.append(s.t)
        xs.append(s.estimates)
        steps.append(step)
        res.append(_gradient_inf(obj, s.estimates))
        pts.append(s.points)
        if keep_states:
            states.append(s)
        if step <= tol:
            converged = True
            break
        stall = stall + 1 if _stalled(prev, step) else 0
        if refine and stall >= stall_window and 2 * s.points - 1 <= max_points:
            s = refine_state(obj, s)
            stall = 0
    return GeneralTrace(np.array(ts), np.array(xs), np.array(steps), np.array(res), np.array(pts),
                        converged=converged, states=states, violations=violations, final_state=s)
