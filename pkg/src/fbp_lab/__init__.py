"""Numerical laboratory for one-phase Bernoulli free boundary problems."""

__version__ = "0.1.0"

from .errors import FbpError
from .solver import (DiskRegion, ProblemSpec, Solution, SolverParams,
                     solve_largest_subsolution)

__all__ = ["FbpError", "DiskRegion", "ProblemSpec", "Solution",
           "SolverParams", "solve_largest_subsolution", "__version__"]
