"""Solver-agnostic MILP container and solution checks."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .expr import LinExpr, Relation, Var, as_expr

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]]*$")

CONTINUOUS = "C"
BINARY = "B"
INTEGER = "I"


class ModelError(ValueError):
    """Invalid model construction (duplicate name, inverted bounds, ...)."""


@dataclass
class Constraint:
    name: str
    index: np.ndarray
    coef: np.ndarray
    sense: str
    rhs: float


@dataclass
class Sos2:
    name: str
    members: list[int]
    weights: list[float]


class Model:
    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.kind: list[str] = []
        self.constraints: list[Constraint] = []
        self.sos2: list[Sos2] = []
        self.objective = LinExpr()
        self._vars: list[Var] = []
        self._var_by_name: dict[str, int] = {}
        self._con_names: set[str] = set()

    # -- variables ---------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.var_names)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def add_var(self, name: str, kind: str = CONTINUOUS, lb: float = 0.0, ub: float = math.inf) -> Var:
        if kind not in (CONTINUOUS, BINARY, INTEGER):
            raise ModelError(f"unknown variable kind {kind!r}")
        if not _NAME_RE.match(name):
            raise ModelError(f"illegal variable name {name!r}")
        if name in self._var_by_name:
            raise ModelError(f"duplicate variable name {name!r}")
        if kind == BINARY:
            lb, ub = max(0.0, lb), min(1.0, ub)
        if lb > ub:
            raise ModelError(f"inverted bounds for {name!r}: {lb} > {ub}")
        idx = len(self.var_names)
        v = Var(idx, name)
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.kind.append(kind)
        self._vars.append(v)
        self._var_by_name[name] = idx
        return v

    def var(self, key: int | str) -> Var:
        if isinstance(key, str):
            key = self._var_by_name[key]
        return self._vars[key]

    def has_var(self, name: str) -> bool:
        return name in self._var_by_name

    def set_bounds(self, var: Var, lb: float | None = None, ub: float | None = None) -> None:
        i = var.index
        lo = self.lb[i] if lb is None else float(lb)
        hi = self.ub[i] if ub is None else float(ub)
        if lo > hi:
            raise ModelError(f"inverted bounds for {var.name!r}: {lo} > {hi}")
        self.lb[i], self.ub[i] = lo, hi

    def fix(self, var: Var, value: float) -> None:
        self.set_bounds(var, value, value)

    def bounds(self, var: Var) -> tuple[float, float]:
        return self.lb[var.index], self.ub[var.index]

    # -- constraints -------------------------------------------------------
    def add_constr(self, rel: Relation, name: str) -> Constraint:
        if not isinstance(rel, Relation):
            raise ModelError("add_constr expects a Relation such as `x + y <= 3`")
        if name in self._con_names:
            raise ModelError(f"duplicate constraint name {name!r}")
        if not _NAME_RE.match(name):
            raise ModelError(f"illegal constraint name {name!r}")
        terms = {i: c for i, c in rel.expr.terms.items() if c != 0.0}
        n = self.num_vars
        for i in terms:
            if not 0 <= i < n:
                raise ModelError(f"constraint {name!r} references an unregistered variable")
        idx = np.fromiter(terms.keys(), dtype=np.int64, count=len(terms))
        coef = np.fromiter(terms.values(), dtype=float, count=len(terms))
        order = np.argsort(idx, kind="stable")
        con = Constraint(name, idx[order], coef[order], rel.sense, -rel.expr.const)
        self.constraints.append(con)
        self._con_names.add(name)
        return con

    def add_sos2(self, members: list[Var], weights: list[float] | None = None, name: str | None = None) -> Sos2:
        if len(members) < 2:
            raise ModelError("an SOS2 set needs at least two members")
        if weights is None:
            weights = [float(k + 1) for k in range(len(members))]
        if len(weights) != len(members) or any(b <= a for a, b in zip(weights, weights[1:])):
            raise ModelError("SOS2 weights must be strictly increasing, one per member")
        name = name or f"sos2_{len(self.sos2)}"
        s = Sos2(name, [m.index for m in members], [float(w) for w in weights])
        self.sos2.append(s)
        return s

    def minimize(self, expr) -> None:
        self.objective = as_expr(expr).copy()

    # -- dense views for backends -------------------------------------------
    def matrix(self) -> sp.csr_matrix:
        rows = [np.full(len(c.index), r, dtype=np.int64) for r, c in enumerate(self.constraints)]
        if rows:
            r = np.concatenate(rows)
            cidx = np.concatenate([c.index for c in self.constraints])
            vals = np.concatenate([c.coef for c in self.constraints])
        else:
            r = cidx = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        return sp.csr_matrix((vals, (r, cidx)), shape=(self.num_constraints, self.num_vars))

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for i, v in self.objective.terms.items():
            c[i] += v
        return c

    def evaluate(self, expr, values: np.ndarray) -> float:
        e = as_expr(expr)
        return float(e.const + sum(c * values[i] for i, c in e.terms.items()))


@dataclass
class Solution:
    status: str  # optimal | infeasible | limit | unbounded | error
    objective: float = math.nan
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mip_gap: float = math.nan
    solve_seconds: float = 0.0
    backend: str = ""
    message: str = ""

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def has_values(self) -> bool:
        return self.values.size > 0 and self.status in ("optimal", "limit")

    def value(self, item) -> float | np.ndarray:
        if isinstance(item, Var):
            return float(self.values[item.index])
        if isinstance(item, LinExpr):
            return item.const + sum(c * self.values[i] for i, c in item.terms.items())
        if isinstance(item, np.ndarray):
            return self.values[item]
        return float(item)


@dataclass
class SolutionCheck:
    max_residual: float
    max_bound_violation: float
    max_integrality: float
    sos2_ok: bool
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_solution(model: Model, sol: Solution, tol: float = 1e-6, zero_tol: float = 1e-9) -> SolutionCheck:
    """Re-verify a solution inside the IR, independently of the backend.

    Row residuals are measured relative to ``max(1, largest |coef * x| in the row)``
    so that rows summing hundreds of large terms are judged on the same footing
    as short ones.
    """
    x = sol.values
    violations: list[str] = []
    max_res = 0.0
    for c in model.constraints:
        terms = c.coef * x[c.index]
        act = terms.sum()
        scale = max(1.0, float(np.abs(terms).max(initial=0.0)), abs(c.rhs))
        if c.sense == "<=":
            res = max(0.0, act - c.rhs)
        elif c.sense == ">=":
            res = max(0.0, c.rhs - act)
        else:
            res = abs(act - c.rhs)
        res /= scale
        max_res = max(max_res, res)
        if res > tol:
            violations.append(f"{c.name}: residual {res:.3g}")
    lb, ub = np.asarray(model.lb), np.asarray(model.ub)
    bviol = np.maximum(lb - x, 0.0) + np.maximum(x - ub, 0.0)
    max_b = float(bviol.max(initial=0.0))
    for i in np.flatnonzero(bviol > tol * np.maximum(1.0, np.abs(x))):
        violations.append(f"{model.var_names[i]}: bound violation {bviol[i]:.3g}")
    kind = np.asarray(model.kind)
    ints = np.flatnonzero(kind != CONTINUOUS)
    frac = np.abs(x[ints] - np.round(x[ints])) if ints.size else np.zeros(0)
    max_int = float(frac.max(initial=0.0))
    for k in np.flatnonzero(frac > tol):
        violations.append(f"{model.var_names[ints[k]]}: fractional {x[ints[k]]:.6g}")
    sos_ok = True
    for s in model.sos2:
        if not sos2_adjacent(x[s.members], zero_tol=max(zero_tol, tol)):
            sos_ok = False
            violations.append(f"{s.name}: SOS2 adjacency violated")
    return SolutionCheck(max_res, max_b, max_int, sos_ok, violations)


def sos2_adjacent(vals, zero_tol: float = 1e-9) -> bool:
    """True when at most two entries are nonzero and those are consecutive."""
    nz = np.flatnonzero(np.abs(np.asarray(vals, dtype=float)) > zero_tol)
    return nz.size <= 1 or (nz.size == 2 and nz[1] - nz[0] == 1)
