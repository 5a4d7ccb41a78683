"""Solver backends.

Two routes are provided:

* ``highs``: in-process HiGHS through :func:`scipy.optimize.milp`;
* ``command``: any executable that reads an LP file and writes a solution
  file (CBC by default), driven by an argument template.

Backends without native SOS2 support receive a binary segment-selection
reformulation. After a MIP solve the integer choices are fixed and the LP is
re-solved ("polishing"), so continuous values sit on exact vertices of the
fixed-binary polytope.
"""

from __future__ import annotations

import copy
import logging
import math
import os
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .expr import quicksum
from .lp_format import SOLUTION_PARSERS, SolutionParseError, export_lp
from .model import BINARY, CONTINUOUS, Model, Solution, check_solution

log = logging.getLogger(__name__)

SOLVER_ENV = "XFCS_SOLVER"

CBC_ARGS = ["-import", "{lp}", "-sec", "{time_limit}", "-ratioGap", "{mip_gap}", "-solve", "-solu", "{sol}"]


class SolverError(RuntimeError):
    pass


class SolverNotFound(SolverError):
    pass


class SolverFailed(SolverError):
    pass


@dataclass
class SolverConfig:
    backend: str = "highs"
    executable: str | None = None
    args: list[str] = field(default_factory=lambda: list(CBC_ARGS))
    solution_format: str = "cbc"
    native_sos2: bool = True
    time_limit: float = 600.0
    mip_gap: float = 1e-4
    feas_tol: float = 1e-6
    polish: bool = True
    verify: bool = True
    workdir: str | None = None

    @classmethod
    def from_env(cls, base: SolverConfig | None = None) -> SolverConfig:
        """Apply the ``XFCS_SOLVER`` override (path to an external executable)."""
        cfg = copy.deepcopy(base) if base is not None else cls()
        exe = os.environ.get(SOLVER_ENV)
        if exe:
            cfg.backend = "command"
            cfg.executable = exe
        return cfg


def solve(model: Model, config: SolverConfig | None = None) -> Solution:
    config = config or SolverConfig()
    t0 = time.perf_counter()
    sol = _dispatch(model, config)
    if config.polish and sol.has_values and _has_discrete(model):
        polished = _polish(model, sol, config)
        if polished is not None:
            sol = polished
    sol.solve_seconds = time.perf_counter() - t0
    if config.verify and sol.has_values:
        chk = check_solution(model, sol, tol=config.feas_tol)
        if not chk.ok:
            log.warning("solution check failed on %d item(s): %s", len(chk.violations), chk.violations[:5])
            sol.message = (sol.message + "; " if sol.message else "") + f"check: {chk.violations[:3]}"
    return sol


def _has_discrete(model: Model) -> bool:
    return bool(model.sos2) or any(k != CONTINUOUS for k in model.kind)


def _dispatch(model: Model, config: SolverConfig) -> Solution:
    if config.backend == "highs":
        work = with_sos2_binaries(model) if model.sos2 else model
        sol = _solve_highs(work, config)
    elif config.backend == "command":
        work = model if config.native_sos2 or not model.sos2 else with_sos2_binaries(model)
        sol = _solve_command(work, config)
    else:
        raise SolverError(f"unknown backend {config.backend!r}")
    if sol.values.size > model.num_vars:
        sol.values = sol.values[: model.num_vars]
    sol.backend = config.backend
    return sol


def with_sos2_binaries(model: Model) -> Model:
    """Copy of ``model`` where every SOS2 set is replaced by segment binaries.

    For members x_1..x_n with finite upper bounds u_k, binaries z_1..z_{n-1}
    select one active segment: sum z = 1, x_1 <= u_1 z_1,
    x_k <= u_k (z_{k-1} + z_k), x_n <= u_n z_{n-1}.
    """
    m = copy.copy(model)
    m.var_names = list(model.var_names)
    m.lb, m.ub, m.kind = list(model.lb), list(model.ub), list(model.kind)
    m._vars = list(model._vars)
    m._var_by_name = dict(model._var_by_name)
    m.constraints = list(model.constraints)
    m._con_names = set(model._con_names)
    m.sos2 = []
    for s in model.sos2:
        members = [m.var(i) for i in s.members]
        ubs = [model.ub[i] for i in s.members]
        if any(math.isinf(u) for u in ubs):
            raise SolverError(f"SOS2 set {s.name!r} needs finite member upper bounds for reformulation")
        z = [m.add_var(f"{s.name}_seg{k}", BINARY) for k in range(len(members) - 1)]
        m.add_constr(quicksum(z) == 1, f"{s.name}_onepiece")
        for k, (x, u) in enumerate(zip(members, ubs)):
            adj = [z[q] for q in (k - 1, k) if 0 <= q < len(z)]
            m.add_constr(x - u * quicksum(adj) <= 0, f"{s.name}_adj{k}")
    return m


def _solve_highs(model: Model, config: SolverConfig) -> Solution:
    c = model.objective_vector()
    integrality = np.array([0 if k == CONTINUOUS else 1 for k in model.kind], dtype=np.int8)
    bounds = Bounds(np.asarray(model.lb), np.asarray(model.ub))
    constraints = None
    if model.num_constraints:
        a = model.matrix()
        lo = np.full(model.num_constraints, -np.inf)
        hi = np.full(model.num_constraints, np.inf)
        for r, con in enumerate(model.constraints):
            if con.sense in ("<=", "=="):
                hi[r] = con.rhs
            if con.sense in (">=", "=="):
                lo[r] = con.rhs
        constraints = LinearConstraint(a, lo, hi)
    options = {"time_limit": float(config.time_limit), "disp": False, "presolve": True}
    if integrality.any():
        options["mip_rel_gap"] = float(config.mip_gap)
    res = milp(c, integrality=integrality, bounds=bounds, constraints=constraints, options=options)
    gap = float(getattr(res, "mip_gap", math.nan) or 0.0) if integrality.any() else 0.0
    if res.status == 0:
        x = np.asarray(res.x, dtype=float)
        return Solution("optimal", float(c @ x) + model.objective.const, x, gap, message=res.message)
    if res.status == 1 and res.x is not None:
        x = np.asarray(res.x, dtype=float)
        return Solution("limit", float(c @ x) + model.objective.const, x, gap, message=res.message)
    if res.status == 1:
        return Solution("limit", message=res.message)
    if res.status == 2:
        return Solution("infeasible", message=res.message)
    if res.status == 3:
        return Solution("unbounded", message=res.message)
    raise SolverFailed(f"HiGHS failed: {res.message}")


def _solve_command(model: Model, config: SolverConfig) -> Solution:
    exe = config.executable or "cbc"
    path = shutil.which(exe) if not os.path.sep in exe else (exe if os.path.exists(exe) else None)
    if path is None:
        raise SolverNotFound(f"solver executable not found: {exe!r}")
    parse = SOLUTION_PARSERS.get(config.solution_format)
    if parse is None:
        raise SolverError(f"no parser for solution format {config.solution_format!r}")
    keep = config.workdir is not None
    workdir = Path(config.workdir) if keep else Path(tempfile.mkdtemp(prefix="xfcs_"))
    workdir.mkdir(parents=True, exist_ok=True)
    lp_path = workdir / f"{model.name}.lp"
    sol_path = workdir / f"{model.name}.sol"
    try:
        lp_path.write_text(export_lp(model, native_sos2=config.native_sos2))
        if sol_path.exists():
            sol_path.unlink()
        fields = {
            "lp": str(lp_path),
            "sol": str(sol_path),
            "time_limit": f"{config.time_limit:g}",
            "mip_gap": f"{config.mip_gap:g}",
        }
        cmd = [path] + [a.format(**fields) for a in config.args]
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=config.time_limit + 60)
        if proc.returncode != 0:
            raise SolverFailed(f"{exe} exited with code {proc.returncode}: {proc.stderr.strip()[-500:]}")
        if not sol_path.exists():
            raise SolutionParseError(f"{exe} wrote no solution file")
        sol = parse(sol_path.read_text(), model)
        if sol.status == "error" and "infeasib" in proc.stdout.lower():
            # CBC's presolve can prove infeasibility without reporting it in the file
            sol.status = "infeasible"
        sol.mip_gap = 0.0 if sol.status == "optimal" else math.nan
        return sol
    finally:
        if not keep:
            shutil.rmtree(workdir, ignore_errors=True)


def _polish(model: Model, sol: Solution, config: SolverConfig) -> Solution | None:
    """Fix integer choices (and SOS2 supports) from ``sol`` and re-solve the LP."""
    lp = copy.copy(model)
    lp.lb, lp.ub, lp.kind = list(model.lb), list(model.ub), list(model.kind)
    lp.sos2 = []
    x = sol.values
    for i, k in enumerate(model.kind):
        if k != CONTINUOUS:
            v = float(np.round(x[i]))
            lp.lb[i] = lp.ub[i] = min(max(v, model.lb[i]), model.ub[i])
            lp.kind[i] = CONTINUOUS
    for s in model.sos2:
        vals = np.abs(x[s.members])
        k = int(np.argmax(vals))
        if len(s.members) > 1:
            left = vals[k - 1] if k > 0 else -1.0
            right = vals[k + 1] if k + 1 < len(s.members) else -1.0
            keep = {k, k - 1} if left > right else {k, k + 1}
        else:
            keep = {k}
        for pos, i in enumerate(s.members):
            if pos not in keep:
                lp.lb[i] = lp.ub[i] = 0.0 if model.lb[i] <= 0.0 <= model.ub[i] else lp.lb[i]
    sub = SolverConfig(**{**config.__dict__, "polish": False, "verify": False})
    try:
        out = _dispatch(lp, sub)
    except SolverError as exc:
        log.warning("polish step failed (%s); keeping MIP solution", exc)
        return None
    if out.status != "optimal":
        log.warning("polish LP returned %s; keeping MIP solution", out.status)
        return None
    vals = out.values.copy()
    for i, k in enumerate(model.kind):
        if k != CONTINUOUS:
            vals[i] = lp.lb[i]
    if out.objective > sol.objective + 1e-7 * max(1.0, abs(sol.objective)):
        return None
    return Solution(sol.status, model.evaluate(model.objective, vals), vals, sol.mip_gap, backend=sol.backend, message=sol.message)
