"""Solver-agnostic MILP representation, LP export and solver bridge."""

from .backends import (
    SOLVER_ENV,
    SolverConfig,
    SolverError,
    SolverFailed,
    SolverNotFound,
    solve,
    with_sos2_binaries,
)
from .expr import LinExpr, Relation, Var, quicksum
from .lp_format import SolutionParseError, export_lp, parse_cbc_solution
from .model import (
    BINARY,
    CONTINUOUS,
    INTEGER,
    Model,
    ModelError,
    Solution,
    check_solution,
    sos2_adjacent,
)

__all__ = [
    "BINARY",
    "CONTINUOUS",
    "INTEGER",
    "LinExpr",
    "Model",
    "ModelError",
    "Relation",
    "SOLVER_ENV",
    "Solution",
    "SolutionParseError",
    "SolverConfig",
    "SolverError",
    "SolverFailed",
    "SolverNotFound",
    "Var",
    "check_solution",
    "export_lp",
    "parse_cbc_solution",
    "quicksum",
    "solve",
    "sos2_adjacent",
    "with_sos2_binaries",
]
