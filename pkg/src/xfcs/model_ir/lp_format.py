"""CPLEX-style LP file export and solution-file parsing."""

from __future__ import annotations

import math
import re

import numpy as np

from .model import BINARY, INTEGER, Model, Solution

_TERMS_PER_LINE = 6
_CONST_VAR = "obj_constant_"


def _num(v: float) -> str:
    # repr is the shortest round-trip form, so output is stable and exact
    if v == math.inf:
        return "+inf"
    if v == -math.inf:
        return "-inf"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _linear(names: list[str], idx, coef) -> list[str]:
    parts = []
    for k, (i, c) in enumerate(zip(idx, coef)):
        mag = _num(abs(c))
        sign = "-" if c < 0 else "+"
        if k == 0 and sign == "+":
            parts.append(f"{mag} {names[i]}")
        else:
            parts.append(f"{sign} {mag} {names[i]}")
    if not parts:
        parts = [f"0 {names[0]}"] if names else ["0"]
    return [" ".join(parts[k : k + _TERMS_PER_LINE]) for k in range(0, len(parts), _TERMS_PER_LINE)]


def export_lp(model: Model, native_sos2: bool = True) -> str:
    """Serialize ``model`` in LP format.

    Output depends only on model contents and insertion order, so identical
    models give identical bytes. A nonzero objective constant is carried by a
    variable fixed at 1 since the grammar has no constant term.
    """
    names = list(model.var_names)
    obj = model.objective
    items = sorted((i, c) for i, c in obj.terms.items() if c != 0.0)
    idx = [i for i, _ in items]
    coef = [c for _, c in items]
    has_const = obj.const != 0.0
    if has_const:
        names.append(_CONST_VAR)
        idx.append(len(names) - 1)
        coef.append(obj.const)

    out = [f"\\ Problem: {model.name}", "Minimize"]
    if names:
        lines = _linear(names, idx, coef)
        out.append(" obj: " + lines[0])
        out.extend("   " + ln for ln in lines[1:])
    out.append("Subject To")
    sense_txt = {"<=": "<=", ">=": ">=", "==": "="}
    for c in model.constraints:
        lines = _linear(names, c.index, c.coef)
        lines[-1] += f" {sense_txt[c.sense]} {_num(c.rhs)}"
        out.append(f" {c.name}: {lines[0]}")
        out.extend("   " + ln for ln in lines[1:])

    out.append("Bounds")
    for i, name in enumerate(model.var_names):
        lo, hi, kind = model.lb[i], model.ub[i], model.kind[i]
        if kind == BINARY and lo == 0.0 and hi == 1.0:
            continue
        if lo == hi:
            out.append(f" {name} = {_num(lo)}")
        elif lo == -math.inf and hi == math.inf:
            out.append(f" {name} free")
        elif hi == math.inf:
            if lo != 0.0:
                out.append(f" {name} >= {_num(lo)}")
        else:
            out.append(f" {_num(lo)} <= {name} <= {_num(hi)}")
    if has_const:
        out.append(f" {_CONST_VAR} = 1")

    binaries = [n for n, k in zip(model.var_names, model.kind) if k == BINARY]
    generals = [n for n, k in zip(model.var_names, model.kind) if k == INTEGER]
    if generals:
        out.append("Generals")
        out.extend(" " + " ".join(generals[k : k + 8]) for k in range(0, len(generals), 8))
    if binaries:
        out.append("Binaries")
        out.extend(" " + " ".join(binaries[k : k + 8]) for k in range(0, len(binaries), 8))
    if model.sos2 and native_sos2:
        out.append("SOS")
        for s in model.sos2:
            members = " ".join(f"{names[m]}:{_num(w)}" for m, w in zip(s.members, s.weights))
            out.append(f" {s.name}: S2:: {members}")
    out.append("End")
    return "\n".join(out) + "\n"


class SolutionParseError(RuntimeError):
    pass


_CBC_STATUS = [
    ("optimal", "optimal"),
    ("infeasible", "infeasible"),
    ("integer infeasible", "infeasible"),
    ("unbounded", "unbounded"),
    ("stopped", "limit"),
    ("status unknown", "error"),
]


def parse_cbc_solution(text: str, model: Model) -> Solution:
    """Parse a CBC ``-solu`` file: a status line, then ``index name value reduced_cost`` rows."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SolutionParseError("empty solution file")
    head = lines[0].strip().lower()
    status = None
    for key, st in _CBC_STATUS:
        if head.startswith(key):
            status = st
            break
    if status is None:
        raise SolutionParseError(f"unrecognized status line: {lines[0]!r}")
    m = re.search(r"objective value\s+(\S+)", head)
    objective = float(m.group(1)) if m else math.nan
    lb = np.asarray(model.lb)
    ub = np.asarray(model.ub)
    values = np.clip(np.zeros(model.num_vars), lb, ub)
    lookup = {n: i for i, n in enumerate(model.var_names)}
    for ln in lines[1:]:
        tok = ln.replace("**", " ").split()
        if len(tok) < 3:
            raise SolutionParseError(f"malformed solution row: {ln!r}")
        name = tok[1]
        if name == _CONST_VAR:
            continue
        if name not in lookup:
            raise SolutionParseError(f"unknown variable in solution: {name!r}")
        try:
            values[lookup[name]] = float(tok[2])
        except ValueError as exc:
            raise SolutionParseError(f"malformed value in row: {ln!r}") from exc
    if status == "infeasible":
        return Solution("infeasible", message=lines[0].strip())
    if status in ("unbounded", "error"):
        return Solution(status, message=lines[0].strip())
    objective = model.evaluate(model.objective, values)
    return Solution(status, objective, values, message=lines[0].strip())


SOLUTION_PARSERS = {"cbc": parse_cbc_solution}
