"""Fixed-point iteration solvers for piecewise linear-quadratic
optimization, with certified and measured linear convergence rates."""

from . import analysis, engine, errors, linalg, operators, polyhedra, problems, prox, rates

__all__ = [
    "analysis",
    "engine",
    "errors",
    "linalg",
    "operators",
    "polyhedra",
    "problems",
    "prox",
    "rates",
]

__version__ = "0.1.0"
