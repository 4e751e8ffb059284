"""Min-sum message passing for pairwise separable convex objectives."""

__version__ = "0.1.0"

from .bounds import BoundReport, bound_general, bound_quadratic, bound_simplified, check_trace, conditioning_value
from .dominance import (
    DominanceCertificate,
    DominanceRefutation,
    certify,
    certify_closed_form,
    certify_general,
    certify_quadratic,
    perron_scaling,
)
from .estimators import DominanceCertifier, MinSumSolver
from .factors import BilinearEdge, CustomEdge, CustomFactor, LogCoshFactor, QuadraticFactor, QuarticFactor
from .generate import generate_random_sdd
from .grid import GridDomain, run_general
from .io import parse_problem, parse_problem_text, write_problem
from .problem import Graph, PairwiseObjective, QuadraticProblem
from .quadratic import DivergenceError, Trace, WellPosednessError, run_quadratic
from .reference import exact_minimiser, solve_general_newton, solve_quadratic_direct
from .tree import build_tree, key_property_check, solve_tree_exact

__all__ = [
    "BilinearEdge", "BoundReport", "CustomEdge", "CustomFactor", "DivergenceError", "DominanceCertificate",
    "DominanceCertifier", "DominanceRefutation", "Graph", "GridDomain", "LogCoshFactor", "MinSumSolver",
    "PairwiseObjective", "QuadraticFactor", "QuadraticProblem", "QuarticFactor", "Trace", "WellPosednessError",
    "bound_general", "bound_quadratic", "bound_simplified", "build_tree", "certify", "certify_closed_form",
    "certify_general", "certify_quadratic", "check_trace", "conditioning_value", "exact_minimiser",
    "generate_random_sdd", "key_property_check", "parse_problem", "parse_problem_text", "perron_scaling",
    "run_general", "run_quadratic", "solve_general_newton", "solve_quadratic_direct", "solve_tree_exact",
    "write_problem",
]
