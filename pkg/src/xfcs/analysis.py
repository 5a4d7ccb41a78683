"""End-to-end runs, derived metrics, relaxation audit and sensitivity sweeps."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .config import StudyConfig
from .fleet_demand import Normal
from .model_ir import BINARY, SolverError
from .scenario_store import CycleLifeCurve, ScenarioSet
from .sizing_det import (
    BuildContext,
    NotOptimal,
    SizingDecision,
    build_context,
    build_det_model,
    extract_decision,
    solve_model,
)
from .sizing_robust import UncertaintySpec, build_robust_model

log = logging.getLogger(__name__)

NO_WEAR = math.inf  # EOL sentinel when the battery never cycles
SWEEP_PARAMS = ("EPM", "ICM", "price_budget", "demand_budget", "pv_budget", "departure_mean_shift", "n_ports")


class QaFailure(RuntimeError):
    pass


@dataclass
class SolveStats:
    status: str
    seconds: float
    backend: str
    n_vars: int
    n_constraints: int
    n_binaries: int
    mip_gap: float


@dataclass
class RunReport:
    label: str
    decision: SizingDecision
    objective: float
    baseline: float
    savings: float  # $/yr vs the no-BESS, no-PV case
    savings_pct: float
    aroi: float  # percent; nan when nothing is invested
    eol_years: float  # inf when the battery never cycles
    stats: SolveStats
    qa: dict | None = None
    parameter: str | None = None
    value: float | None = None

    def to_dict(self) -> dict:
        d = self.decision.summary()
        return _clean(
            {
                "label": self.label,
                "parameter": self.parameter,
                "value": self.value,
                "objective": self.objective,
                "baseline": self.baseline,
                "savings": self.savings,
                "savings_pct": self.savings_pct,
                "aroi_pct": self.aroi,
                "eol_years": self.eol_years,
                "decision": d,
                "stats": dataclasses.asdict(self.stats),
                "qa": self.qa,
            }
        )


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


# ---------------------------------------------------------------------------
# metrics


def eol_estimate(decision: SizingDecision, curve: CycleLifeCurve | None = None) -> float:
    """Years until the lifetime cycles allowed at the chosen DoD are used up."""
    if decision.annual_cycles <= 1e-9:
        return NO_WEAR
    if curve is not None and not math.isnan(decision.dod):
        allowed = curve.cycles_at(decision.dod)
    else:
        allowed = decision.allowed_cycles
    return allowed / decision.annual_cycles


def aroi(savings: float, investment: float) -> float:
    """Annual savings as a percentage of the annualised investment."""
    if investment <= 0:
        return math.nan
    return 100.0 * savings / investment


# ---------------------------------------------------------------------------
# single runs


def _context(cfg: StudyConfig, sset: ScenarioSet, **overrides) -> BuildContext:
    opts = replace(cfg.options, **overrides)
    return build_context(sset, cfg.tech, cfg.tariff, cfg.effective_costs(), cfg.curve(), opts)


def _robust_specs(cfg: StudyConfig, budgets: dict | None = None):
    r = cfg.robust
    b = {"price": r.price_budget_pct, "demand": r.demand_budget_pct, "pv": r.pv_budget_pct}
    b.update(budgets or {})
    return (
        UncertaintySpec.from_percent(r.price_half_width, b["price"]),
        UncertaintySpec.from_percent(r.demand_half_width, b["demand"]),
        UncertaintySpec.from_percent(r.pv_half_width, b["pv"]),
    )


def solve_once(cfg: StudyConfig, sset: ScenarioSet, mode: str = "det", budgets=None, **overrides):
    """Build and solve one model. Returns (decision, stats, ctx)."""
    ctx = _context(cfg, sset, **overrides)
    if mode == "det":
        model, vm = build_det_model(ctx)
    elif mode == "robust":
        price, demand, pv = _robust_specs(cfg, budgets)
        model, vm, _ = build_robust_model(ctx, price, demand, pv, cfg.robust.absolute_exposure)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    sol = solve_model(model, ctx, vm, cfg.solver.solver_config())
    stats = SolveStats(
        sol.status,
        sol.solve_seconds,
        sol.backend,
        model.num_vars,
        model.num_constraints,
        sum(k == BINARY for k in model.kind),
        sol.mip_gap,
    )
    decision = extract_decision(sol, ctx, vm)
    return decision, stats, ctx


def _fixed_overrides(d: SizingDecision) -> dict:
    out = {"fix_pv": d.p_pv, "fix_bess": (d.c_bess, d.p_bess)}
    if not math.isnan(d.dod):
        out["fix_dod"] = d.dod / 100.0
    return out


def run_base_case(cfg: StudyConfig, sset: ScenarioSet) -> RunReport:
    """Station without BESS or PV: only grid energy and demand charges are paid."""
    decision, stats, _ = solve_once(cfg, sset, "det", fix_pv=0.0, fix_bess=(0.0, 0.0))
    return RunReport("base", decision, decision.objective, decision.objective, 0.0, 0.0, math.nan, NO_WEAR, stats)


def tighten_relaxation(cfg: StudyConfig, sset: ScenarioSet, baseline: float, mode: str = "det", budgets=None,
                       rounds: int = 10, tol_pct: float = 5e-3, shrink: float = 0.1, start: float = 0.2):
    """Trust-region tightening of the C_BESS box used by the McCormick envelopes.

    The relaxation is re-solved inside a shrinking box around the current
    capacity; when the optimum sits on a box edge the box is recentred
    without shrinking. Stops once fixing the planning decisions and
    re-solving the (then exact) model moves savings by at most ``tol_pct``
    percent. Returns (decision, stats, qa) for the final relaxed solve.
    """
    c_lo, c_hi = cfg.options.c_bounds or cfg.tech.energy_bounds
    decision, stats, _ = solve_once(cfg, sset, mode, budgets)
    qa = relaxation_qa(cfg, sset, decision, baseline, mode, budgets)
    history = [qa]
    width = start
    for _ in range(rounds):
        if qa["savings_gap_pct"] <= tol_pct:
            break
        centre = decision.c_bess
        box = (max(c_lo, centre * (1.0 - width)), min(c_hi, centre * (1.0 + width)))
        decision, stats, _ = solve_once(cfg, sset, mode, budgets, c_bounds=box)
        qa = relaxation_qa(cfg, sset, decision, baseline, mode, budgets)
        history.append(qa)
        span = box[1] - box[0]
        on_edge = span > 0 and min(decision.c_bess - box[0], box[1] - decision.c_bess) <= 1e-6 * span
        on_edge = on_edge and not (decision.c_bess in (c_lo, c_hi))
        if not on_edge:
            width *= shrink
    qa = dict(qa, rounds=len(history), history=[h["savings_gap_pct"] for h in history])
    return decision, stats, qa


def relaxation_qa(cfg: StudyConfig, sset: ScenarioSet, decision: SizingDecision, baseline: float,
                  mode: str = "det", budgets=None) -> dict:
    """Fix the planning decisions of a relaxed solve and re-solve exactly.

    With C_BESS fixed both bilinear terms collapse to linear expressions, so
    the re-solve is the exact model. Gaps are percentages of the relaxed
    values; the relaxed optimum never exceeds the fixed one.
    """
    try:
        fixed, _, _ = solve_once(cfg, sset, mode, budgets, **_fixed_overrides(decision))
    except NotOptimal as exc:
        raise QaFailure(f"fixed-decision model not solvable: {exc}") from exc
    inv_r, inv_f = decision.investment, fixed.investment
    op_r, op_f = decision.objective - inv_r, fixed.objective - inv_f
    sav_r, sav_f = baseline - decision.objective, baseline - fixed.objective

    def gap(a, b):
        return 0.0 if abs(a) < 1e-9 and abs(b) < 1e-9 else 100.0 * abs(b - a) / max(abs(a), 1e-9)

    return {
        "relaxed_objective": decision.objective,
        "fixed_objective": fixed.objective,
        "investment_gap_pct": gap(inv_r, inv_f),
        "operation_gap_pct": gap(op_r, op_f),
        "savings_gap_pct": gap(sav_r, sav_f),
        "objective_gap": fixed.objective - decision.objective,
        "relaxed_savings": sav_r,
        "fixed_savings": sav_f,
        "fixed_annual_cycles": fixed.annual_cycles,
        "fixed_allowed_cycles": fixed.allowed_cycles,
    }


def run_case(cfg: StudyConfig, sset: ScenarioSet, baseline: float, mode: str = "det", label: str = "case",
             budgets=None, tighten: bool | None = None, **overrides) -> RunReport:
    """Solve one sizing case and attach savings, AROI and EOL.

    McCormick runs with degradation get the trust-region tightening unless
    ``tighten`` is False (or planning decisions are fixed).
    """
    opts = replace(cfg.options, **overrides)
    relaxed = opts.degradation and opts.cycle_model == "mccormick" and opts.fix_bess is None
    if tighten is None:
        tighten = relaxed
    run_cfg = replace(cfg, options=opts)
    qa = None
    if tighten and relaxed:
        decision, stats, qa = tighten_relaxation(run_cfg, sset, baseline, mode, budgets)
    else:
        decision, stats, _ = solve_once(run_cfg, sset, mode, budgets)
    savings = baseline - decision.objective
    return RunReport(
        label,
        decision,
        decision.objective,
        baseline,
        savings,
        100.0 * savings / baseline if baseline else 0.0,
        aroi(savings, decision.investment),
        eol_estimate(decision, run_cfg.curve()),
        stats,
        qa,
    )


# ---------------------------------------------------------------------------
# sweeps


def _shift_departure(cfg: StudyConfig, minutes: float) -> StudyConfig:
    """Shift the weekday departure mean of the first (commuter) category."""
    cats = list(cfg.fleet.categories)
    c0 = cats[0]
    cats[0] = replace(c0, departure_weekday=Normal(c0.departure_weekday.mean + minutes, c0.departure_weekday.std))
    return replace(cfg, fleet=replace(cfg.fleet, categories=cats))


def config_for_point(cfg: StudyConfig, parameter: str, value: float) -> tuple[StudyConfig, dict | None]:
    if parameter == "EPM":
        return replace(cfg, price_multiplier=cfg.price_multiplier * value), None
    if parameter == "ICM":
        return replace(cfg, capex_multiplier=cfg.capex_multiplier * value), None
    if parameter in ("price_budget", "demand_budget", "pv_budget"):
        return cfg, {parameter.split("_")[0]: value}
    if parameter == "departure_mean_shift":
        return _shift_departure(cfg, value), None
    if parameter == "n_ports":
        if value < 1 or value != int(value):
            raise ValueError("n_ports must be a positive integer")
        return replace(cfg, station=replace(cfg.station, n_ports=int(value))), None
    raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMS}")


def run_point(cfg: StudyConfig, parameter: str, value: float, mode: str | None = None):
    """One sweep point, including its own base case. Returns a RunReport or an error string."""
    try:
        pcfg, budgets = config_for_point(cfg, parameter, value)
        if mode is None:
            mode = "robust" if budgets else "det"
        sset = pcfg.scenarios()
        base = run_base_case(pcfg, sset)
        rep = run_case(pcfg, sset, base.objective, mode, f"{parameter}={value:g}", budgets)
        rep.parameter, rep.value = parameter, value
        return rep
    except (SolverError, NotOptimal, QaFailure, ValueError) as exc:
        log.warning("sweep point %s=%s failed: %s", parameter, value, exc)
        return f"{parameter}={value:g}: {exc}"


def run_sweep(cfg: StudyConfig, parameter: str, values, workers: int | None = None, mode: str | None = None):
    """Solve every grid point; failures are recorded and the sweep continues.

    Returns (reports, failures) with reports in grid order.
    """
    values = list(values)
    if not values:
        raise ValueError("sweep grid is empty")
    if parameter not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMS}")
    workers = workers or cfg.solver.workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_point, [cfg] * len(values), [parameter] * len(values), values,
                                    [mode] * len(values)))
    else:
        results = [run_point(cfg, parameter, v, mode) for v in values]
    reports = [r for r in results if isinstance(r, RunReport)]
    failures = [r for r in results if isinstance(r, str)]
    return reports, failures


# ---------------------------------------------------------------------------
# reports

SUMMARY_COLUMNS = (
    "label", "parameter", "value", "c_bess_kwh", "p_bess_kw", "dod_pct", "annual_cycles", "p_pv_kw",
    "annual_max_kw", "MDC", "ADC", "IC&OM_BESS", "IC&OM_PV", "OpC", "objective", "savings", "savings_pct",
    "aroi_pct", "eol_years", "status",
)


def _row(r: RunReport) -> list:
    d = r.decision
    vals = [r.label, r.parameter or "", "" if r.value is None else r.value, d.c_bess, d.p_bess, d.dod,
            d.annual_cycles, d.p_pv, d.annual_max]
    vals += [d.costs.get(k, 0.0) for k in ("MDC", "ADC", "IC&OM_BESS", "IC&OM_PV", "OpC")]
    vals += [r.objective, r.savings, r.savings_pct, r.aroi, r.eol_years, r.stats.status]
    return vals


def emit_report(reports, path, traces: bool = True) -> list[Path]:
    """Write ``<path>/report.json``, ``<path>/summary.csv`` and per-run trace CSVs."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to write")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / "report.json"
    p.write_text(json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True))
    written.append(p)
    p = out / "summary.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for r in reports:
            w.writerow(_row(r))
    written.append(p)
    qa_rows = [r for r in reports if r.qa]
    if qa_rows:
        p = out / "relaxation_qa.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "investment_gap_pct", "operation_gap_pct", "savings_gap_pct", "rounds"])
            for r in qa_rows:
                q = r.qa
                w.writerow([r.label, q["investment_gap_pct"], q["operation_gap_pct"], q["savings_gap_pct"],
                            q.get("rounds", 1)])
        written.append(p)
    if traces:
        for r in reports:
            written += r.decision.write_traces(out / "traces" / _slug(r.label))
    return written


def _slug(s: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in s)


def read_report(path) -> list[dict]:
    return json.loads((Path(path) / "report.json").read_text())
