"""Command line: ``minsum {solve,certify,exact,tree,bound,gen,check}``.

Exit codes: 0 success, 1 a bound, invariant or certificate failed, 2 bad input.
Node indices on the command line are 1-based, as in problem files.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import io
import sys

import numpy as np

from . import __version__
from .bounds import BOUND_KINDS, BoundInapplicableError, check_trace
from .dominance import DominanceCertificate, certify, certify_general
from .generate import generate_random_sdd
from .grid import DEFAULT_POINTS, MAX_POINTS, BoundaryMinimiserError, DomainError, run_general
from .io import ProblemFormatError, format_problem, parse_problem, write_certificate, write_trace_csv
from .problem import QuadraticProblem
from .quadratic import DivergenceError, WellPosednessError, p3_violations, run_quadratic
from .reference import NewtonError, NotPositiveDefiniteError, exact_minimiser
from .tree import MAX_TREE_NODES, TreeTooLargeError, build_tree, key_property_check, projected_tree_size

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _floats(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _box(text: str):
    v = _floats(text)
    if v.size != 2 or not v[0] < v[1]:
        raise argparse.ArgumentTypeError("box must be LO,HI with LO < HI")
    return tuple(v.tolist())


def _load(path):
    try:
        return parse_problem(path)
    except (ProblemFormatError, FileNotFoundError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _x0(args, n):
    if getattr(args, "x0", None) is None:
        return np.zeros(n)
    if args.x0.size != n:
        raise InputError(f"--x0 has {args.x0.size} entries, problem has n={n}")
    return args.x0


def _run(problem, args, x0, keep_states=False, check=False):
    quad = isinstance(problem, QuadraticProblem) and not getattr(args, "force_general", False)
    if quad:
        tol = 1e-10 if args.tol is None else args.tol
        return run_quadratic(problem, x0, t_max=args.t_max, tol=tol, keep_states=keep_states)
    tol = 1e-8 if args.tol is None else args.tol
    return run_general(problem, x0, t_max=args.t_max, tol=tol, points=args.grid_points,
                       max_points=args.max_grid_points, margin=args.margin, check=check, keep_states=keep_states)


def _fmt_vec(x) -> str:
    return " ".join(f"{v:.12g}" for v in np.asarray(x).tolist())


def _cert_or_none(problem):
    try:
        c = certify(problem)
    except ValueError:
        return None
    return c


# ---------------------------------------------------------------------------


def cmd_solve(args, out):
    problem = _load(args.problem)
    x0 = _x0(args, problem.n)
    trace = _run(problem, args, x0)
    cert = _cert_or_none(problem)
    err = bnd = None
    if isinstance(cert, DominanceCertificate):
        try:
            rep = check_trace(trace, problem, cert=cert)
            err = np.r_[np.nan, rep.measured]
            bnd = np.r_[np.nan, rep.bound]
        except (BoundInapplicableError, NewtonError, NotPositiveDefiniteError):
            pass
    if args.trace_out:
        write_trace_csv(trace, args.trace_out, full_x=args.full_x, err_weighted=err, bound_value=bnd)
    status = "converged" if trace.converged else "stopped at t_max"
    print(f"{status} after {trace.n_iter} updates; last step {trace.step_inf[-1]:.3g}", file=out)
    print(f"x = {_fmt_vec(trace.final)}", file=out)
    return EXIT_OK


def cmd_certify(args, out):
    problem = _load(args.problem)
    if args.lam is not None:
        if args.w is not None and args.w.size != problem.n:
            raise InputError(f"--w has {args.w.size} entries, problem has n={problem.n}")
        obj = problem.to_pairwise() if isinstance(problem, QuadraticProblem) else problem
        cert = certify_general(obj, args.lam, args.w, args.box, args.samples, args.seed)
    else:
        try:
            cert = certify(problem)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    if args.out:
        write_certificate(cert, args.out)
    if isinstance(cert, DominanceCertificate):
        print(f"certified ({cert.kind}): lambda = {cert.lam:.12g}", file=out)
        print(f"w = {_fmt_vec(cert.w)}", file=out)
        if cert.kind == "sampled":
            print(f"checked at {cert.sample_count} points of the box only; this is evidence, not proof", file=out)
        return EXIT_OK
    if cert.lambda_star is not None:
        print(f"refuted: lambda* = {cert.lambda_star:.12g} >= 1 (no scaling achieves lambda < 1)", file=out)
    else:
        print(f"refuted: row {cert.row + 1} violates the inequality at x = {_fmt_vec(cert.witness)}", file=out)
    return EXIT_FAIL


def cmd_exact(args, out):
    problem = _load(args.problem)
    try:
        x = exact_minimiser(problem)
    except NotPositiveDefiniteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"x* = {_fmt_vec(x)}", file=out)
    if isinstance(problem, QuadraticProblem):
        print(f"residual |Ax - b|_inf = {problem.residual_inf(x):.3g}", file=out)
    print(f"gradient |grad F|_inf = {np.max(np.abs(_pairwise(problem).gradient(x)), initial=0.0):.3g}", file=out)
    return EXIT_OK


def _pairwise(problem):
    return problem.to_pairwise() if isinstance(problem, QuadraticProblem) else problem


def write_tree_edges(tree, fh) -> None:
    """One line per tree edge: ``parent child sigma(parent) sigma(child)``, all 1-based."""
    fh.write(f"# computation tree: root {tree.root + 1}, depth {tree.depth}, {tree.size} nodes\n")
    for p, v in tree.edges:
        fh.write(f"{p + 1} {v + 1} {tree.label[p] + 1} {tree.label[v] + 1}\n")


def cmd_tree(args, out):
    problem = _load(args.problem)
    root = args.root - 1
    if not 0 <= root < problem.n:
        raise InputError(f"--root must lie in 1..{problem.n}")
    projected = projected_tree_size(problem.graph, root, args.depth)
    print(f"projected tree nodes: {projected:.0f}", file=out)
    if projected > args.max_nodes:
        raise TreeTooLargeError(projected, args.max_nodes)
    if args.edges_out:
        tree = build_tree(problem.graph, root, args.depth, args.max_nodes)
        if args.edges_out == "-":
            write_tree_edges(tree, out)
        else:
            with open(args.edges_out, "w") as fh:
                write_tree_edges(tree, fh)
    kw = {}
    if not isinstance(problem, QuadraticProblem):
        kw = {"points": args.grid_points, "margin": args.margin}
    res = key_property_check(problem, root, args.depth, max_nodes=args.max_nodes, **kw)
    tol = args.tol if args.tol is not None else (1e-9 if isinstance(problem, QuadraticProblem) else 1e-6)
    print(f"tree nodes: {res.tree_size}", file=out)
    print(f"tree root optimum: {res.tree_value:.15g}", file=out)
    print(f"min-sum estimate after {args.depth} updates: {res.minsum_value:.15g}", file=out)
    print(f"difference: {res.difference:.3g} (tolerance {tol:g})", file=out)
    return EXIT_OK if res.difference <= tol else EXIT_FAIL


def cmd_bound(args, out):
    problem = _load(args.problem)
    x0 = _x0(args, problem.n)
    cert = _cert_or_none(problem)
    if not isinstance(cert, DominanceCertificate):
        print("no dominance certificate: bounds do not apply", file=out)
        return EXIT_FAIL
    trace = _run(problem, args, x0)
    try:
        rep = check_trace(trace, problem, args.kind, cert=cert, x0=x0)
    except BoundInapplicableError as exc:
        raise InputError(str(exc)) from None
    text = rep.to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        out.write(text)
    print(rep.summary(), file=out)
    return EXIT_OK if rep.all_satisfied else EXIT_FAIL


def cmd_gen(args, out):
    try:
        q = generate_random_sdd(args.n, args.degree, args.lambda_target, args.seed, graph=args.graph)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    text = format_problem(q)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        out.write(text)
    return EXIT_OK


def check_problem_file(path, depth: int = 3, t_max: int = 200, grid_points: int = DEFAULT_POINTS,
                       max_nodes: int = MAX_TREE_NODES) -> tuple[bool, str]:
    """Certify, solve, compare with the exact answer, the computation trees and the bounds."""
    buf = io.StringIO()
    ok = True

    def say(msg):
        print(msg, file=buf)

    def fail(msg):
        nonlocal ok
        ok = False
        say("FAIL " + msg)

    problem = _load(path)
    quad = isinstance(problem, QuadraticProblem)
    say(f"== {path}: n={problem.n}, edges={problem.graph.n_edges}, {'quadratic' if quad else 'general'}")
    cert = _cert_or_none(problem)
    if isinstance(cert, DominanceCertificate):
        say(f"ok   certificate ({cert.kind}) lambda={cert.lam:.12g}")
    elif cert is None:
        say("note no closed-form certificate; bounds skipped")
    else:
        say(f"note dominance refuted (lambda*={cert.lambda_star}); convergence is not guaranteed")
    try:
        if quad:
            trace = run_quadratic(problem, t_max=t_max, keep_states=True)
        else:
            trace = run_general(problem, t_max=t_max, points=grid_points, check=True)
    except (WellPosednessError, DivergenceError, BoundaryMinimiserError) as exc:
        fail(f"min-sum aborted: {exc}")
        return ok, buf.getvalue()
    say(f"{'ok  ' if trace.converged else 'note'} min-sum {'converged' if trace.converged else 'stopped'} "
        f"after {trace.n_iter} updates")
    try:
        x_star = exact_minimiser(problem)
    except (NotPositiveDefiniteError, NewtonError) as exc:
        fail(f"reference solver: {exc}")
        return ok, buf.getvalue()
    err = float(np.max(np.abs(trace.final - x_star), initial=0.0))
    tol_x = 1e-8 if quad else 1e-6
    if trace.converged and err > tol_x:
        fail(f"final estimate differs from the exact minimiser by {err:.3g}")
    else:
        say(f"ok   |x - x*|_inf = {err:.3g}")
    if isinstance(cert, DominanceCertificate):
        if quad:
            bad = sum(len(p3_violations(problem, s, cert.lam, cert.w)) for s in trace.states)
            (fail if bad else say)(f"{'' if bad else 'ok   '}message invariants: {bad} violation(s)")
        else:
            nv = len(trace.violations)
            (fail if nv else say)(f"{'' if nv else 'ok   '}grid convexity/envelope/slope checks: {nv} violation(s)")
        kinds = ("quadratic_simplified", "quadratic") if quad else ("general", "general_simplified")
        for kind in kinds:
            try:
                rep = check_trace(trace, problem, kind, cert=cert, x_star=x_star)
            except BoundInapplicableError as exc:
                say(f"note {kind} bound not applicable: {exc}")
                continue
            (say if rep.all_satisfied else fail)(("ok   " if rep.all_satisfied else "") + rep.summary())
    worst = 0.0
    tol_tree = 1e-9 if quad else 1e-6
    checked = 0
    for r in range(problem.n):
        for d in range(depth + 1):
            if projected_tree_size(problem.graph, r, d) > max_nodes:
                break
            try:
                res = key_property_check(problem, r, d, max_nodes=max_nodes)
            except TreeTooLargeError:
                break
            worst = max(worst, res.difference)
            checked += 1
    if worst > tol_tree:
        fail(f"computation-tree roots differ from min-sum by up to {worst:.3g} (tolerance {tol_tree:g})")
    else:
        say(f"ok   computation trees: {checked} (root, depth) pairs agree within {worst:.3g}")
    say("PASS" if ok else "FAILED")
    return ok, buf.getvalue()


def _check_one(job):
    path, depth, t_max, points, max_nodes = job
    try:
        return check_problem_file(path, depth, t_max, points, max_nodes)
    except InputError as exc:
        return None, f"error: {exc}\n"


def cmd_check(args, out):
    jobs = [(p, args.depth, args.t_max, args.grid_points, args.max_nodes) for p in args.problems]
    if args.jobs > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(args.jobs) as ex:
            results = list(ex.map(_check_one, jobs))
    else:
        results = [_check_one(j) for j in jobs]
    code = EXIT_OK
    for ok, text in results:
        out.write(text)
        if ok is None:
            code = max(code, EXIT_INPUT)
        elif not ok and code == EXIT_OK:
            code = EXIT_FAIL
    return code


# ---------------------------------------------------------------------------


def _solver_flags(p, general_only=False):
    if not general_only:
        p.add_argument("--t-max", type=int, default=200, help="maximum message updates (default 200)")
        p.add_argument("--tol", type=float, default=None,
                       help="stop when max |x^(t) - x^(t-1)| <= tol (default 1e-10 quadratic, 1e-8 grid)")
        p.add_argument("--x0", type=_floats, default=None, help="initial point, comma separated (default 0)")
        p.add_argument("--force-general", action="store_true", help="use the grid path on quadratic input")
    p.add_argument("--grid-points", type=int, default=DEFAULT_POINTS, help="points per node grid, 2^k+1 (default 1025)")
    p.add_argument("--max-grid-points", type=int, default=MAX_POINTS, help="refinement cap (default 4097)")
    p.add_argument("--margin", type=float, default=2.0, help="grid domain safety factor > 1 (default 2)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="minsum", description="Min-sum message passing for pairwise convex problems.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run min-sum and report the estimate")
    p.add_argument("problem")
    _solver_flags(p)
    p.add_argument("--trace-out", help="write the per-iteration trace as CSV")
    p.add_argument("--full-x", action="store_true", help="include x_0..x_{n-1} columns in the trace")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", help="find or check a scaled-dominance certificate")
    p.add_argument("problem")
    p.add_argument("--lam", type=float, default=None, help="check this lambda by sampling instead of computing one")
    p.add_argument("--w", type=_floats, default=None, help="scaling for --lam (default all ones)")
    p.add_argument("--box", type=_box, default=None, help="sampling box LO,HI (default -10,10)")
    p.add_argument("--samples", type=int, default=4096, help="Sobol samples (default 4096)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the certificate as JSON")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("exact", help="reference minimiser (Cholesky or Newton)")
    p.add_argument("problem")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("tree", help="compare a computation-tree optimum with min-sum")
    p.add_argument("problem")
    p.add_argument("--root", type=int, required=True, help="root node, 1-based")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--max-nodes", type=int, default=MAX_TREE_NODES)
    p.add_argument("--tol", type=float, default=None, help="agreement tolerance (default 1e-9 quadratic, 1e-6 grid)")
    p.add_argument("--edges-out", help="write the tree edge list with node labels ('-' for stdout)")
    _solver_flags(p, general_only=True)
    p.set_defaults(func=cmd_tree)

    p = sub.add_parser("bound", help="measured error against a convergence-rate bound, as CSV")
    p.add_argument("problem")
    p.add_argument("--kind", choices=BOUND_KINDS, default=None)
    _solver_flags(p)
    p.add_argument("--out", help="write the CSV here instead of stdout")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("gen", help="random scaled-diagonally-dominant quadratic problem")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--lambda-target", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--graph", choices=("regular", "tree"), default="regular")
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("check", help="certify, solve, exact, computation trees and bounds in one go")
    p.add_argument("problems", nargs="+")
    p.add_argument("--depth", type=int, default=3, help="largest computation-tree depth (default 3)")
    p.add_argument("--t-max", type=int, default=200)
    p.add_argument("--grid-points", type=int, default=DEFAULT_POINTS)
    p.add_argument("--max-nodes", type=int, default=MAX_TREE_NODES)
    p.add_argument("--jobs", type=int, default=1, help="check files in parallel processes")
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args, out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (WellPosednessError, DivergenceError) as exc:
        print(f"min-sum aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (BoundaryMinimiserError, DomainError, TreeTooLargeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
