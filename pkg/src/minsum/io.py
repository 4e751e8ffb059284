"""Problem files, certificate JSON and trace CSV.

Problem files are line-oriented text with 1-based node indices; ``#``
starts a comment::

    format_version 1
    n 2
    kind quadratic
    A 1 1 2.0
    A 1 2 1.0
    A 2 2 2.0
    b 1 1.0

``A i j v`` may be given once per unordered pair; a mirrored entry is
accepted only if it repeats the same value.  Missing ``b`` entries are 0.
General problems use ``kind general`` with ``node i <family> k=v ...`` and
``edge i j <family> k=v ...`` lines; nodes without a line are rejected.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .dominance import DominanceCertificate, DominanceRefutation
from .factors import make_edge_factor, make_node_factor
from .problem import Graph, PairwiseObjective, QuadraticProblem

FORMAT_VERSION = 1


class ProblemFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def _number(tok: str, line: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ProblemFormatError(f"expected a number, got {tok!r}", line) from None
    if not math.isfinite(v):
        raise ProblemFormatError(f"non-finite value {tok!r}", line)
    return v


def _index(tok: str, n: int | None, line: int) -> int:
    if n is None:
        raise ProblemFormatError("'n' must be declared before entries", line)
    try:
        i = int(tok)
    except ValueError:
        raise ProblemFormatError(f"expected a 1-based node index, got {tok!r}", line) from None
    if not 1 <= i <= n:
        raise ProblemFormatError(f"node index {i} out of range 1..{n}", line)
    return i - 1


def _params(tokens, line: int) -> dict:
    out = {}
    for tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep or not key:
            raise ProblemFormatError(f"expected key=value, got {tok!r}", line)
        if key in out:
            raise ProblemFormatError(f"parameter {key!r} given twice", line)
        out[key] = _number(val, line)
    return out


def parse_problem_text(text: str):
    """Parse problem text into a :class:`QuadraticProblem` or :class:`PairwiseObjective`."""
    header = {}
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        key = tokens[0]
        if key in ("format_version", "n", "kind"):
            if key in header:
                raise ProblemFormatError(f"{key!r} declared twice", lineno)
            if len(tokens) != 2:
                raise ProblemFormatError(f"{key!r} takes exactly one value", lineno)
            header[key] = (tokens[1], lineno)
        else:
            entries.append((lineno, tokens))
    if "format_version" in header and header["format_version"][0] != str(FORMAT_VERSION):
        raise ProblemFormatError(f"unsupported format_version {header['format_version'][0]}", header["format_version"][1])
    if "n" not in header:
        raise ProblemFormatError("missing 'n' line")
    ntok, nline = header["n"]
    try:
        n = int(ntok)
    except ValueError:
        raise ProblemFormatError(f"n must be an integer, got {ntok!r}", nline) from None
    if n < 1:
        raise ProblemFormatError("n must be >= 1", nline)
    kind = header.get("kind", ("quadratic", None))[0]
    if kind == "quadratic":
        return _parse_quadratic(n, entries)
    if kind == "general":
        return _parse_general(n, entries)
    raise ProblemFormatError(f"unknown kind {kind!r}", header["kind"][1])


def _parse_quadratic(n: int, entries) -> QuadraticProblem:
    A = {}
    b = np.zeros(n)
    seen_b = set()
    for line, tok in entries:
        if tok[0] == "A":
            if len(tok) != 4:
                raise ProblemFormatError("expected 'A i j value'", line)
            i, j = _index(tok[1], n, line), _index(tok[2], n, line)
            v = _number(tok[3], line)
            if (i, j) in A:
                raise ProblemFormatError(f"duplicate entry A {i + 1} {j + 1}", line)
            if (j, i) in A and i != j:
                if A[(j, i)] != v:
                    raise ProblemFormatError(
                        f"asymmetric entries: A {j + 1} {i + 1} = {A[(j, i)]!r} but A {i + 1} {j + 1} = {v!r}", line)
                A[(i, j)] = v
                continue
            A[(i, j)] = v
        elif tok[0] == "b":
            if len(tok) != 3:
                raise ProblemFormatError("expected 'b i value'", line)
            i = _index(tok[1], n, line)
            if i in seen_b:
                raise ProblemFormatError(f"duplicate entry b {i + 1}", line)
            seen_b.add(i)
            b[i] = _number(tok[2], line)
        else:
            raise ProblemFormatError(f"unknown entry {tok[0]!r} in a quadratic problem", line)
    rows, cols, vals = [], [], []
    for (i, j), v in A.items():
        if i == j:
            rows.append(i), cols.append(i), vals.append(v)
        elif (j, i) not in A or i < j:
            rows += [i, j]
            cols += [j, i]
            vals += [v, v]
    for i in range(n):
        if (i, i) not in A:
            raise ProblemFormatError(f"missing diagonal entry A {i + 1} {i + 1}")
    M = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    try:
        return QuadraticProblem(M, b)
    except ValueError as exc:
        raise ProblemFormatError(str(exc)) from None


def _parse_general(n: int, entries) -> PairwiseObjective:
    nodes = [None] * n
    edges = {}
    for line, tok in entries:
        try:
            if tok[0] == "node":
                if len(tok) < 3:
                    raise ProblemFormatError("expected 'node i family k=v ...'", line)
                i = _index(tok[1], n, line)
                if nodes[i] is not None:
                    raise ProblemFormatError(f"node {i + 1} defined twice", line)
                nodes[i] = make_node_factor(tok[2], **_params(tok[3:], line))
            elif tok[0] == "edge":
                if len(tok) < 4:
                    raise ProblemFormatError("expected 'edge i j family k=v ...'", line)
                i, j = _index(tok[1], n, line), _index(tok[2], n, line)
                if i == j:
                    raise ProblemFormatError("self-loop edge", line)
                key = (min(i, j), max(i, j))
                if key in edges:
                    raise ProblemFormatError(f"duplicate edge {i + 1} {j + 1}", line)
                f = make_edge_factor(tok[3], **_params(tok[4:], line))
                edges[key] = f if i < j else f.swapped()
            else:
                raise ProblemFormatError(f"unknown entry {tok[0]!r} in a general problem", line)
        except ProblemFormatError:
            raise
        except (ValueError, TypeError) as exc:
            raise ProblemFormatError(str(exc), line) from None
    missing = [i + 1 for i, f in enumerate(nodes) if f is None]
    if missing:
        raise ProblemFormatError(f"no node factor for node(s) {missing}")
    g = Graph(n, list(edges))
    return PairwiseObjective(g, tuple(nodes), tuple(edges[e] for e in g.edges))


def parse_problem(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read problem file {path}: {exc.strerror}") from None
    return parse_problem_text(text)


def _fmt(v: float) -> str:
    return repr(float(v))


def format_problem(problem) -> str:
    """Text that :func:`parse_problem_text` reads back to an equal problem."""
    lines = [f"format_version {FORMAT_VERSION}", f"n {problem.n}"]
    if isinstance(problem, QuadraticProblem):
        lines.append("kind quadratic")
        U = sp.triu(problem.A).tocoo()
        for i, j, v in sorted(zip(U.row.tolist(), U.col.tolist(), U.data.tolist())):
            lines.append(f"A {i + 1} {j + 1} {_fmt(v)}")
        for i, v in enumerate(problem.b.tolist()):
            if v != 0:
                lines.append(f"b {i + 1} {_fmt(v)}")
        return "\n".join(lines) + "\n"
    lines.append("kind general")
    for i, f in enumerate(problem.node_factors):
        if f.family not in ("quadratic", "quartic", "logcosh"):
            raise ValueError(f"node {i} uses a {f.family!r} factor, which has no file representation")
        kv = " ".join(f"{k}={_fmt(v)}" for k, v in f.params().items())
        lines.append(f"node {i + 1} {f.family} {kv}")
    for (i, j), f in zip(problem.graph.edges, problem.edge_factors):
        if f.family != "bilinear":
            raise ValueError(f"edge ({i}, {j}) uses a {f.family!r} factor, which has no file representation")
        kv = " ".join(f"{k}={_fmt(v)}" for k, v in f.params().items())
        lines.append(f"edge {i + 1} {j + 1} {f.family} {kv}")
    return "\n".join(lines) + "\n"


def write_problem(problem, path) -> None:
    Path(path).write_text(format_problem(problem))


def certificate_to_dict(cert) -> dict:
    if isinstance(cert, DominanceCertificate):
        return {"certified": True, "lambda": cert.lam, "w": cert.w.tolist(), "kind": cert.kind,
                "sample_count": cert.sample_count, "box": None if cert.box is None else [list(b) for b in cert.box]}
    if isinstance(cert, DominanceRefutation):
        return {"certified": False, "lambda_star": cert.lambda_star,
                "witness": None if cert.witness is None else cert.witness.tolist(), "row": cert.row}
    raise TypeError(f"not a certificate: {cert!r}")


def certificate_from_dict(d: dict):
    if not isinstance(d, dict) or "certified" not in d:
        raise ValueError("certificate JSON needs a 'certified' field")
    if d["certified"]:
        box = d.get("box")
        return DominanceCertificate(float(d["lambda"]), np.asarray(d["w"], dtype=float), d.get("kind", "exact_quadratic"),
                                    int(d.get("sample_count", 0)), None if box is None else tuple(tuple(b) for b in box))
    w = d.get("witness")
    return DominanceRefutation(d.get("lambda_star"), None if w is None else np.asarray(w, dtype=float), d.get("row"))


def write_certificate(cert, path) -> None:
    Path(path).write_text(json.dumps(certificate_to_dict(cert), indent=2) + "\n")


def read_certificate(path):
    try:
        return certificate_from_dict(json.loads(Path(path).read_text()))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValueError(f"malformed certificate file {path}: {exc}") from None


TRACE_COLUMNS = ("t", "step_inf", "residual_inf", "err_weighted", "bound_value", "grid_points")


def write_trace_csv(trace, path_or_file, full_x: bool = False, err_weighted=None, bound_value=None) -> None:
    """Columns ``t, [x_0..x_{n-1},] step_inf, residual_inf, err_weighted, bound_value, grid_points``.

    ``err_weighted`` and ``bound_value`` align with trace rows; missing values
    are left empty (row 0 has no step and no bound).
    """
    rows = len(trace.t)
    n = trace.x.shape[1]
    err = [None] * rows if err_weighted is None else list(err_weighted)
    bnd = [None] * rows if bound_value is None else list(bound_value)
    pts = [None] * rows if trace.grid_points is None else trace.grid_points.tolist()

    def cell(v):
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return ""
        return repr(v) if isinstance(v, float) else str(v)

    header = ["t"] + ([f"x_{i}" for i in range(n)] if full_x else []) + list(TRACE_COLUMNS[1:])
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in range(rows):
            xs = [cell(float(v)) for v in trace.x[r]] if full_x else []
            wr.writerow([int(trace.t[r])] + xs + [cell(float(trace.step_inf[r])), cell(float(trace.residual_inf[r])),
                                                  cell(None if err[r] is None else float(err[r])),
                                                  cell(None if bnd[r] is None else float(bnd[r])),
                                                  cell(None if pts[r] is None else int(pts[r]))])
    finally:
        if own:
            fh.close()


def read_trace_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for key in rows[0].keys() if rows else ():
        out[key] = np.array([float(r[key]) if r[key] != "" else np.nan for r in rows])
    return out
