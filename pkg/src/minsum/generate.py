"""Random scaled-diagonally-dominant quadratic test problems."""

from __future__ import annotations

import networkx as nx
import numpy as np
import scipy.sparse as sp

from .problem import QuadraticProblem


def random_graph_edges(n: int, degree: int, rng: np.random.Generator, graph: str = "regular") -> list:
    if graph == "tree":
        return [(int(rng.integers(0, v)), v) for v in range(1, n)]
    if graph != "regular":
        raise ValueError(f"unknown graph kind {graph!r}; use 'regular' or 'tree'")
    d = degree if (n * degree) % 2 == 0 else degree - 1
    if d == 0:
        # n odd with degree 1: a perfect matching plus one extra edge
        perm = rng.permutation(n)
        edges = [(int(perm[k]), int(perm[k + 1])) for k in range(0, n - 1, 2)]
        edges.append((int(perm[-1]), int(perm[0])))
        return edges
    G = nx.random_regular_graph(d, n, seed=int(rng.integers(0, 2**31 - 1)))
    return [(min(i, j), max(i, j)) for i, j in G.edges()]


def generate_random_sdd(n: int, degree: int = 3, lambda_target: float = 0.5, seed: int = 0,
                        graph: str = "regular") -> QuadraticProblem:
    """Random sparse problem whose Perron certificate gives ``lambda <= lambda_target``.

    Off-diagonals are ``+-U[0.1, 1]``; row i's diagonal is its absolute
    off-diagonal sum divided by ``lambda_target`` and inflated by
    ``U[1, 1.25]``, so even ``w = 1`` certifies the target.  When the
    degree times n is odd the regular graph uses degree - 1.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 1 <= degree < n:
        raise ValueError(f"degree must satisfy 1 <= degree < n, got degree={degree}, n={n}")
    if not 0 < lambda_target < 1:
        raise ValueError("lambda_target must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    edges = random_graph_edges(n, degree, rng, graph)
    m = len(edges)
    vals = rng.uniform(0.1, 1.0, m) * rng.choice([-1.0, 1.0], m)
    rows = np.array([e[0] for e in edges], dtype=int)
    cols = np.array([e[1] for e in edges], dtype=int)
    rowsum = np.bincount(rows, np.abs(vals), n) + np.bincount(cols, np.abs(vals), n)
    diag = rowsum / lambda_target * rng.uniform(1.0, 1.25, n)
    diag[diag == 0] = rng.uniform(1.0, 2.0, int(np.sum(diag == 0)))
    A = sp.csr_matrix((np.r_[diag, vals, vals], (np.r_[np.arange(n), rows, cols], np.r_[np.arange(n), cols, rows])),
                      shape=(n, n))
    b = rng.uniform(-1.0, 1.0, n)
    return QuadraticProblem(A, b)
