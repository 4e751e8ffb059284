"""Pairwise-separable objectives, the quadratic special case, and graph topology."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .factors import BilinearEdge, EdgeFactor, QuadraticFactor, ScalarFactor


class Graph:
    """Undirected simple graph on nodes ``0..n-1``.

    Edges are stored once, as ``(i, j)`` with ``i < j``, sorted.  Directed
    edges (the message slots) are numbered ``0..2|E|-1``: directed edge
    ``2k`` is ``i -> j`` and ``2k + 1`` is ``j -> i`` for undirected edge ``k``.
    """

    def __init__(self, n: int, edges=()):
        n = int(n)
        if n < 1:
            raise ValueError("graph needs at least one node")
        canon = set()
        for e in edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) references a node outside 0..{n - 1}")
            key = (min(i, j), max(i, j))
            if key in canon:
                raise ValueError(f"duplicate edge {key}")
            canon.add(key)
        self.n = n
        self.edges = tuple(sorted(canon))
        self._edge_index = {e: k for k, e in enumerate(self.edges)}
        nbrs = [[] for _ in range(n)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        self.neighbors = tuple(tuple(sorted(v)) for v in nbrs)

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={len(self.edges)})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.n == other.n and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.n, self.edges))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self._edge_index

    def edge_index(self, i: int, j: int) -> int:
        return self._edge_index[(min(i, j), max(i, j))]

    @cached_property
    def directed(self) -> tuple[np.ndarray, np.ndarray]:
        """``(src, dst)`` arrays over the 2|E| directed edges."""
        m = len(self.edges)
        src = np.empty(2 * m, dtype=np.intp)
        dst = np.empty(2 * m, dtype=np.intp)
        for k, (i, j) in enumerate(self.edges):
            src[2 * k], dst[2 * k] = i, j
            src[2 * k + 1], dst[2 * k + 1] = j, i
        return src, dst

    @cached_property
    def reverse(self) -> np.ndarray:
        """Index of the opposite directed edge."""
        return np.arange(2 * len(self.edges)) ^ 1

    def directed_index(self, i: int, j: int) -> int:
        k = self.edge_index(i, j)
        return 2 * k if i < j else 2 * k + 1

    def components(self) -> list[np.ndarray]:
        """Connected components as sorted node-index arrays."""
        if not self.edges:
            return [np.array([i]) for i in range(self.n)]
        src, dst = self.directed
        adj = sp.csr_matrix((np.ones(len(src)), (src, dst)), shape=(self.n, self.n))
        ncomp, labels = sp.csgraph.connected_components(adj, directed=False)
        return [np.flatnonzero(labels == c) for c in range(ncomp)]

    def is_tree(self) -> bool:
        return len(self.components()) == 1 and len(self.edges) == self.n - 1

    def eccentricity(self, r: int) -> int:
        dist = self.distances(r)
        return int(max(d for d in dist if d >= 0))

    def distances(self, r: int) -> list[int]:
        dist = [-1] * self.n
        dist[r] = 0
        frontier = [r]
        while frontier:
            nxt = []
            for v in frontier:
                for u in self.neighbors[v]:
                    if dist[u] < 0:
                        dist[u] = dist[v] + 1
                        nxt.append(u)
            frontier = nxt
        return dist

    def diameter(self) -> int:
        return max(self.eccentricity(r) for r in range(self.n))

    def relabel(self, perm) -> "Graph":
        """Graph with node ``v`` renamed ``perm[v]``."""
        perm = list(perm)
        return Graph(self.n, [(perm[i], perm[j]) for i, j in self.edges])


@dataclass(frozen=True, eq=False)
class PairwiseObjective:
    """``F(x) = sum_i f_i(x_i) + sum_(i,j) f_ij(x_i, x_j)`` over a graph.

    ``edge_factors[k]`` belongs to ``graph.edges[k] = (i, j)`` with ``i < j``
    and is evaluated as ``f_ij(x_i, x_j)``.
    """

    graph: Graph
    node_factors: tuple
    edge_factors: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "node_factors", tuple(self.node_factors))
        object.__setattr__(self, "edge_factors", tuple(self.edge_factors))
        if len(self.node_factors) != self.graph.n:
            raise ValueError(f"{len(self.node_factors)} node factors for {self.graph.n} nodes")
        if len(self.edge_factors) != self.graph.n_edges:
            raise ValueError(f"{len(self.edge_factors)} edge factors for {self.graph.n_edges} edges")
        for f in self.node_factors:
            if not isinstance(f, ScalarFactor):
                raise TypeError(f"node factor {f!r} is not a ScalarFactor")
        for f in self.edge_factors:
            if not isinstance(f, EdgeFactor):
                raise TypeError(f"edge factor {f!r} is not an EdgeFactor")

    @property
    def n(self) -> int:
        return self.graph.n

    def oriented(self, i: int, j: int) -> EdgeFactor:
        """``f_ij`` as a function of ``(x_i, x_j)``, for either orientation."""
        f = self.edge_factors[self.graph.edge_index(i, j)]
        return f if i < j else f.swapped()

    def value(self, x) -> float:
        x = _check_point(x, self.n)
        total = sum(float(f.value(x[i])) for i, f in enumerate(self.node_factors))
        for (i, j), f in zip(self.graph.edges, self.edge_factors):
            total += float(f.value(x[i], x[j]))
        return total

    def gradient(self, x) -> np.ndarray:
        x = _check_point(x, self.n)
        g = np.array([float(f.grad(x[i])) for i, f in enumerate(self.node_factors)])
        for (i, j), f in zip(self.graph.edges, self.edge_factors):
            g[i] += float(f.d1(x[i], x[j]))
            g[j] += float(f.d2(x[i], x[j]))
        return g

    def hessian(self, x) -> sp.csr_matrix:
        """Sparse Hessian assembled from the analytic factor partials."""
        x = _check_point(x, self.n)
        diag = self.diagonal_hessian(x)
        rows, cols, vals = list(range(self.n)), list(range(self.n)), list(diag)
        for (i, j), f in zip(self.graph.edges, self.edge_factors):
            c = float(f.d12(x[i], x[j]))
            rows += [i, j]
            cols += [j, i]
            vals += [c, c]
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def diagonal_hessian(self, x) -> np.ndarray:
        """``d^2F/dx_i^2`` for every node; ``x`` may carry leading batch axes."""
        x = np.asarray(x, dtype=float)
        d = np.stack([np.asarray(f.hess(x[..., i]), dtype=float) for i, f in enumerate(self.node_factors)], axis=-1)
        for (i, j), f in zip(self.graph.edges, self.edge_factors):
            d[..., i] += f.d11(x[..., i], x[..., j])
            d[..., j] += f.d22(x[..., i], x[..., j])
        return d

    def diagonal_curvature_range(self):
        """Closed-form ``(inf, sup)`` of ``d^2F/dx_i^2`` per node, or ``None`` if any factor lacks one."""
        lo = np.empty(self.n)
        hi = np.empty(self.n)
        for i, f in enumerate(self.node_factors):
            r = f.curvature_range()
            if r is None:
                return None
            lo[i], hi[i] = r
        for (i, j), f in zip(self.graph.edges, self.edge_factors):
            r1, r2 = f.d11_range(), f.d22_range()
            if r1 is None or r2 is None:
                return None
            lo[i] += r1[0]
            hi[i] += r1[1]
            lo[j] += r2[0]
            hi[j] += r2[1]
        return lo, hi

    def coupling_sup(self):
        """Closed-form ``sup |d12 f_ij|`` per edge, or ``None``."""
        out = []
        for f in self.edge_factors:
            c = f.coupling_sup()
            if c is None:
                return None
            out.append(c)
        return np.array(out, dtype=float)

    def relabel(self, perm) -> "PairwiseObjective":
        perm = list(perm)
        g = self.graph.relabel(perm)
        nodes = [None] * self.n
        for v, f in enumerate(self.node_factors):
            nodes[perm[v]] = f
        edges = [None] * g.n_edges
        for (i, j), f in zip(self.graph.edges, self.edge_factors):
            pi, pj = perm[i], perm[j]
            edges[g.edge_index(pi, pj)] = f if pi < pj else f.swapped()
        return PairwiseObjective(g, nodes, edges)


class QuadraticProblem:
    """``F(x) = x^T A x / 2 - b^T x`` with ``A`` sparse symmetric.

    The graph is the off-diagonal nonzero pattern of ``A``.  Positive
    definiteness is not checked here; the direct solver reports it.
    """

    def __init__(self, A, b, *, rtol: float = 0.0):
        A = sp.csr_matrix(A, dtype=float)
        b = np.asarray(b, dtype=float).ravel()
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if b.shape != (n,):
            raise ValueError(f"b has length {b.size}, expected {n}")
        if not (np.all(np.isfinite(A.data)) and np.all(np.isfinite(b))):
            raise ValueError("A and b must be finite")
        asym = abs(A - A.T)
        if asym.nnz and asym.max() > rtol * max(1.0, abs(A).max()):
            raise ValueError("A is not symmetric")
        A.eliminate_zeros()
        diag = A.diagonal()
        bad = np.flatnonzero(~(diag > 0))
        if bad.size:
            raise ValueError(f"non-positive diagonal entry a[{bad[0]},{bad[0]}] = {diag[bad[0]]}")
        self.A = A
        self.b = b
        self.diag = diag
        coo = sp.triu(A, k=1).tocoo()
        self.graph = Graph(n, zip(coo.row.tolist(), coo.col.tolist()))
        # coefficient per undirected edge, in graph.edges order
        self.edge_coef = np.array([A[i, j] for i, j in self.graph.edges], dtype=float)

    @property
    def n(self) -> int:
        return self.graph.n

    def __repr__(self) -> str:
        return f"QuadraticProblem(n={self.n}, edges={self.graph.n_edges})"

    def value(self, x) -> float:
        x = _check_point(x, self.n)
        return float(0.5 * x @ (self.A @ x) - self.b @ x)

    def gradient(self, x) -> np.ndarray:
        x = _check_point(x, self.n)
        return self.A @ x - self.b

    def hessian(self, x=None) -> sp.csr_matrix:
        return self.A

    def residual_inf(self, x) -> float:
        return float(np.max(np.abs(self.gradient(x)), initial=0.0))

    def coef(self, i: int, j: int) -> float:
        return float(self.A[i, j])

    def to_pairwise(self) -> PairwiseObjective:
        return quadratic_to_pairwise(self)

    def relabel(self, perm) -> "QuadraticProblem":
        perm = np.asarray(perm)
        P = sp.csr_matrix((np.ones(self.n), (perm, np.arange(self.n))), shape=(self.n, self.n))
        b = np.empty(self.n)
        b[perm] = self.b
        return QuadraticProblem(P @ self.A @ P.T, b)

    @classmethod
    def from_dense(cls, A, b) -> "QuadraticProblem":
        return cls(np.asarray(A, dtype=float), b)


def _check_point(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"point has shape {x.shape}, expected ({n},)")
    return x


def evaluate_objective(obj, x) -> float:
    """``F(x)`` for a :class:`PairwiseObjective` or :class:`QuadraticProblem`."""
    return obj.value(x)


def partial_hessian(obj, x, i: int, j: int) -> float:
    """``d^2F / dx_i dx_j``; ``(i, j)`` must be a diagonal entry or an edge."""
    if isinstance(obj, QuadraticProblem):
        _check_point(x, obj.n)
        if i != j and not obj.graph.has_edge(i, j):
            raise ValueError(f"({i}, {j}) is not an edge")
        return float(obj.A[i, j])
    x = _check_point(x, obj.n)
    if i == j:
        return float(obj.diagonal_hessian(x)[i])
    if not obj.graph.has_edge(i, j):
        raise ValueError(f"({i}, {j}) is not an edge")
    return float(obj.oriented(i, j).d12(x[i], x[j]))


def quadratic_to_pairwise(q: QuadraticProblem) -> PairwiseObjective:
    """Natural split: ``f_i = a_ii x^2 / 2 - b_i x`` and ``f_ij = a_ij x_i x_j``."""
    nodes = [QuadraticFactor(a, b) for a, b in zip(q.diag, q.b)]
    edges = [BilinearEdge(c) for c in q.edge_coef]
    return PairwiseObjective(q.graph, nodes, edges)


def as_pairwise(problem) -> PairwiseObjective:
    if isinstance(problem, QuadraticProblem):
        return quadratic_to_pairwise(problem)
    return problem
