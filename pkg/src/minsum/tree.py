"""Depth-t computation trees.

The depth-t tree rooted at r unrolls the graph along non-backtracking walks
of length up to t.  Every tree node carries a copy of its original node's
factor; each depth-t leaf additionally absorbs the initial messages from
the neighbours it has no tree edge to.  The root coordinate of the tree's
minimiser then equals the min-sum estimate at r computed from ``J^(t)``,
i.e. trace row ``t + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .factors import EdgeSlice, SumFactor
from .problem import Graph, PairwiseObjective, QuadraticProblem
from .quadratic import WellPosednessError, run_quadratic
from .reference import solve_general_newton

MAX_TREE_NODES = 200_000


class TreeTooLargeError(ValueError):
    def __init__(self, projected: float, limit: int):
        super().__init__(f"computation tree would have {projected:.6g} nodes, above the limit of {limit}")
        self.projected = projected
        self.limit = limit


@dataclass(frozen=True)
class ComputationTree:
    """Tree node 0 is the root; ``parent[0] == -1``; nodes are stored level by level."""

    graph: Graph
    root: int
    depth: int
    label: np.ndarray
    parent: np.ndarray
    level: np.ndarray

    @property
    def size(self) -> int:
        return int(self.label.size)

    @property
    def edges(self) -> list:
        return [(int(self.parent[v]), v) for v in range(1, self.size)]

    def level_sizes(self) -> np.ndarray:
        return np.bincount(self.level, minlength=self.depth + 1)

    def leaf_externals(self, v: int) -> list:
        """Original neighbours whose initial messages enter tree node ``v``."""
        lab = int(self.label[v])
        if self.level[v] < self.depth:
            return []
        if v == 0:
            return list(self.graph.neighbors[lab])
        p = int(self.label[self.parent[v]])
        return [u for u in self.graph.neighbors[lab] if u != p]

    def as_graph(self) -> Graph:
        return Graph(self.size, self.edges)


def projected_tree_size(graph: Graph, root: int, depth: int) -> float:
    """Node count of the depth-``depth`` tree, via non-backtracking walk counts on directed edges."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    src, dst = graph.directed
    m2 = src.size
    total = 1.0
    if depth == 0 or m2 == 0:
        return total
    # transition e=(u->v) -> f=(v->w), w != u
    rows, cols = [], []
    out_edges = [[] for _ in range(graph.n)]
    for e, u in enumerate(src.tolist()):
        out_edges[u].append(e)
    for e, (u, v) in enumerate(zip(src.tolist(), dst.tolist())):
        for f in out_edges[v]:
            if dst[f] != u:
                rows.append(f)
                cols.append(e)
    T = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(m2, m2))
    cnt = (src == root).astype(float)
    for _ in range(depth):
        total += cnt.sum()
        if not np.isfinite(total):
            break
        cnt = T @ cnt
    return float(total)


def build_tree(graph: Graph, root: int, depth: int, max_nodes: int = MAX_TREE_NODES) -> ComputationTree:
    if not 0 <= root < graph.n:
        raise ValueError(f"root {root} is not a node (n={graph.n})")
    projected = projected_tree_size(graph, root, depth)
    if projected > max_nodes:
        raise TreeTooLargeError(projected, max_nodes)
    label, parent, level = [root], [-1], [0]
    frontier = [0]
    for k in range(1, depth + 1):
        nxt = []
        for v in frontier:
            lab = label[v]
            back = label[parent[v]] if parent[v] >= 0 else -1
            for u in graph.neighbors[lab]:
                if u != back:
                    label.append(u)
                    parent.append(v)
                    level.append(k)
                    nxt.append(len(label) - 1)
        frontier = nxt
    return ComputationTree(graph, root, depth, np.array(label), np.array(parent), np.array(level))


def _tree_quadratic_terms(q: QuadraticProblem, tree: ComputationTree, x0):
    """Diagonal, linear terms and parent couplings of the tree objective."""
    A = q.diag[tree.label].astype(float)
    B = q.b[tree.label].astype(float)
    for v in np.flatnonzero(tree.level == tree.depth):
        lab = int(tree.label[v])
        for u in tree.leaf_externals(int(v)):
            B[v] -= q.coef(lab, u) * x0[u]
    coup = np.zeros(tree.size)
    for v in range(1, tree.size):
        coup[v] = q.coef(int(tree.label[tree.parent[v]]), int(tree.label[v]))
    return A, B, coup


def tree_quadratic_problem(q: QuadraticProblem, tree: ComputationTree, x0=None) -> QuadraticProblem:
    """The tree objective as an explicit quadratic problem."""
    x0 = np.zeros(q.n) if x0 is None else np.asarray(x0, dtype=float)
    A, B, coup = _tree_quadratic_terms(q, tree, x0)
    child = np.arange(1, tree.size)
    par = tree.parent[1:]
    M = sp.csr_matrix((np.r_[A, coup[1:], coup[1:]], (np.r_[np.arange(tree.size), par, child],
                                                      np.r_[np.arange(tree.size), child, par])),
                      shape=(tree.size, tree.size))
    return QuadraticProblem(M, B)


def solve_tree_quadratic(q: QuadraticProblem, tree: ComputationTree, x0=None) -> np.ndarray:
    """Exact tree minimiser by leaf-to-root elimination and back substitution."""
    x0 = np.zeros(q.n) if x0 is None else np.asarray(x0, dtype=float)
    A, B, coup = _tree_quadratic_terms(q, tree, x0)
    for v in range(tree.size - 1, 0, -1):
        if not A[v] > 0:
            raise WellPosednessError(f"tree elimination pivot {A[v]:.6g} <= 0 at tree node {v}", node=v)
        p = tree.parent[v]
        A[p] -= coup[v] ** 2 / A[v]
        B[p] -= coup[v] * B[v] / A[v]
    if not A[0] > 0:
        raise WellPosednessError(f"tree elimination pivot {A[0]:.6g} <= 0 at the root", node=0)
    x = np.empty(tree.size)
    x[0] = B[0] / A[0]
    for v in range(1, tree.size):
        x[v] = (B[v] - coup[v] * x[tree.parent[v]]) / A[v]
    return x


def tree_objective(obj: PairwiseObjective, tree: ComputationTree, x0=None) -> PairwiseObjective:
    """The tree objective for general factors; leaves carry slices of their external edges at ``x0``."""
    x0 = np.zeros(obj.n) if x0 is None else np.asarray(x0, dtype=float)
    nodes = []
    for v in range(tree.size):
        lab = int(tree.label[v])
        ext = tree.leaf_externals(v)
        f = obj.node_factors[lab]
        if ext:
            f = SumFactor([f] + [EdgeSlice(obj.oriented(lab, u), float(x0[u])) for u in ext])
        nodes.append(f)
    tg = tree.as_graph()
    lookup = {}
    for v in range(1, tree.size):
        p = int(tree.parent[v])
        lookup[(min(p, v), max(p, v))] = obj.oriented(int(tree.label[min(p, v)]), int(tree.label[max(p, v)]))
    edges = tuple(lookup[e] for e in tg.edges)
    return PairwiseObjective(tg, tuple(nodes), edges)


def solve_tree_exact(problem, root: int, depth: int, x0=None, max_nodes: int = MAX_TREE_NODES):
    """Root value of the depth-``depth`` tree minimiser, plus the tree and full tree minimiser."""
    graph = problem.graph
    tree = build_tree(graph, root, depth, max_nodes)
    if isinstance(problem, QuadraticProblem):
        x = solve_tree_quadratic(problem, tree, x0)
    else:
        x0v = np.zeros(problem.n) if x0 is None else np.asarray(x0, dtype=float)
        x = solve_general_newton(tree_objective(problem, tree, x0v), x_init=x0v[tree.label])
    return float(x[0]), tree, x


@dataclass(frozen=True)
class KeyPropertyResult:
    root: int
    depth: int
    tree_value: float
    minsum_value: float
    tree_size: int

    @property
    def difference(self) -> float:
        return abs(self.tree_value - self.minsum_value)


def key_property_check(problem, root: int, depth: int, x0=None, max_nodes: int = MAX_TREE_NODES,
                       **grid_kw) -> KeyPropertyResult:
    """Compare the depth-``depth`` tree root with min-sum trace row ``depth + 1`` at ``root``."""
    value, tree, _ = solve_tree_exact(problem, root, depth, x0, max_nodes)
    if isinstance(problem, QuadraticProblem):
        tr = run_quadratic(problem, x0, t_max=depth + 1, tol=1e-300)
    else:
        from .grid import run_general
        tr = run_general(problem, x0, t_max=depth + 1, tol=1e-300, refine=False, **grid_kw)
    row = np.flatnonzero(tr.t == depth + 1)
    if row.size == 0:
        # the run stopped early on an exactly zero step: later rows repeat the last one
        ms = float(tr.x[-1, root])
    else:
        ms = float(tr.x[row[0], root])
    return KeyPropertyResult(root, depth, value, ms, tree.size)
