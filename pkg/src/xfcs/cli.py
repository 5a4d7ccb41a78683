"""Command line entry point: ``xfcs demand|solve|sweep|qa|report``.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 QA failure.
Set ``XFCS_SOLVER`` to an LP-reading MIP executable (CBC by default) to
solve through the external backend instead of in-process HiGHS.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from .analysis import (
    SWEEP_PARAMS,
    QaFailure,
    emit_report,
    read_report,
    run_base_case,
    run_case,
    run_sweep,
)
from .config import ConfigError, StudyConfig
from .model_ir import SolverError, export_lp
from .scenario_store import IngestionError, AssemblyError
from .sizing_det import NotOptimal, build_context, build_det_model

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_QA = 4

log = logging.getLogger("xfcs")


def _load(args) -> StudyConfig:
    cfg = StudyConfig.load(args.config) if args.config else StudyConfig()
    if getattr(args, "dt", None):
        cfg = replace(cfg, step_minutes=args.dt)
    if getattr(args, "time_limit", None):
        cfg = replace(cfg, solver=replace(cfg.solver, time_limit=args.time_limit))
    return cfg


def _budgets(items) -> dict:
    out = {}
    for item in items or []:
        key, _, val = item.partition("=")
        if key not in ("price", "demand", "pv") or not val:
            raise ConfigError(f"budget must look like price=40, demand=100 or pv=20, got {item!r}")
        out[key] = float(val)
    return out


def _fmt(x: float, nd: int = 2) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "-"
    if isinstance(x, float) and math.isinf(x):
        return "no wear"
    return f"{x:,.{nd}f}"


def _print_report(rep) -> None:
    d = rep.decision
    print(f"[{rep.label}] status={rep.stats.status} solve={rep.stats.seconds:.1f}s")
    print(f"  C_BESS {_fmt(d.c_bess)} kWh  P_BESS {_fmt(d.p_bess)} kW  DoD {_fmt(d.dod, 1)} %  "
          f"cycles/yr {_fmt(d.annual_cycles, 1)}  PV {_fmt(d.p_pv)} kW")
    print(f"  peak import {_fmt(d.annual_max)} kW  " + "  ".join(f"{k} {_fmt(v)}" for k, v in d.costs.items()))
    print(f"  total {_fmt(rep.objective)} $/yr  savings {_fmt(rep.savings)} $/yr ({_fmt(rep.savings_pct)} %)  "
          f"AROI {_fmt(rep.aroi)} %  EOL {_fmt(rep.eol_years, 1)} yr")
    if rep.qa:
        q = rep.qa
        print(f"  relaxation gap: investment {q['investment_gap_pct']:.4f} %  operation "
              f"{q['operation_gap_pct']:.4f} %  savings {q['savings_gap_pct']:.4f} %")


# ---------------------------------------------------------------------------
# verbs


def cmd_demand(args) -> int:
    cfg = _load(args)
    weekday, weekend = cfg.demand()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for prof in (weekday, weekend):
        prof.write_csv(out / f"demand_{prof.day_type}.csv")
        print(f"{prof.day_type}: {prof.total:,.1f} kWh/day, peak {prof.energy.max():.2f} kWh/min, "
              f"{len(prof.sessions)} sessions, {prof.rejected_count} turned away")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _load(args)
    overrides = {}
    if args.no_degradation:
        overrides["degradation"] = False
    if args.fix_pv is not None:
        overrides["fix_pv"] = args.fix_pv
    if args.fix_bess is not None:
        overrides["fix_bess"] = tuple(args.fix_bess)
    if args.partitions:
        overrides["partitions"] = args.partitions
    if args.cycle_model:
        overrides["cycle_model"] = args.cycle_model
    sset = cfg.scenarios()
    if args.lp:
        ctx = build_context(sset, cfg.tech, cfg.tariff, cfg.effective_costs(), cfg.curve(),
                            replace(cfg.options, exclusivity="full", **overrides))
        model, _ = build_det_model(ctx)
        Path(args.lp).write_text(export_lp(model))
        print(f"wrote {args.lp}: {model.num_vars} variables, {model.num_constraints} constraints")
    base = run_base_case(cfg, sset)
    _print_report(base)
    rep = run_case(cfg, sset, base.objective, args.mode, f"{args.mode}", _budgets(args.budget),
                   tighten=False if args.no_tighten else None, **overrides)
    _print_report(rep)
    if args.out:
        files = emit_report([base, rep], args.out)
        print(f"wrote {len(files)} files under {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    reports, failures = run_sweep(cfg, args.param, args.values, args.workers, args.mode)
    for rep in reports:
        _print_report(rep)
    for f in failures:
        print(f"FAILED {f}")
    if reports and args.out:
        emit_report(reports, args.out, traces=not args.no_traces)
        print(f"wrote {len(reports)} points under {args.out}")
    return EXIT_OK if reports else EXIT_SOLVER


def cmd_qa(args) -> int:
    cfg = _load(args)
    sset = cfg.scenarios()
    base = run_base_case(cfg, sset)
    rep = run_case(cfg, sset, base.objective, "det", "qa", tighten=True)
    _print_report(rep)
    gap = rep.qa["savings_gap_pct"] if rep.qa else 0.0
    if args.out:
        emit_report([base, rep], args.out)
    if gap > args.max_gap:
        print(f"QA FAILED: savings gap {gap:.5f} % exceeds {args.max_gap} %")
        return EXIT_QA
    print(f"QA passed: savings gap {gap:.5f} % <= {args.max_gap} %")
    return EXIT_OK


def cmd_report(args) -> int:
    rows = read_report(args.dir)
    cols = ("label", "c_bess", "p_bess", "dod", "annual_cycles", "p_pv", "annual_max")
    print("\t".join(cols + ("total", "savings_pct", "aroi_pct", "eol_years")))
    for r in rows:
        d = r["decision"]
        vals = [r["label"]] + [d[c] for c in cols[1:]] + [r["objective"], r["savings_pct"], r["aroi_pct"],
                                                          r["eol_years"]]
        print("\t".join(v if isinstance(v, str) else _fmt(v) for v in vals))
    if args.json:
        print(json.dumps(rows, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xfcs", description="XFCS BESS and PV sizing toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("--config", help="study configuration JSON (defaults are used when omitted)")
        sp.add_argument("--dt", type=int, help="time step in minutes (overrides the config)")
        sp.add_argument("--time-limit", type=float, help="per-solve time limit in seconds")

    sp = sub.add_parser("demand", help="simulate weekday and weekend charging demand")
    common(sp)
    sp.add_argument("--out", default="demand_out")
    sp.set_defaults(func=cmd_demand)

    sp = sub.add_parser("solve", help="size BESS and PV for one case")
    common(sp)
    sp.add_argument("--mode", choices=("det", "robust"), default="det")
    sp.add_argument("--no-degradation", action="store_true", help="drop the cycle-life and DoD constraints")
    sp.add_argument("--fix-pv", type=float, metavar="KW")
    sp.add_argument("--fix-bess", type=float, nargs=2, metavar=("KWH", "KW"))
    sp.add_argument("--partitions", type=int, help="McCormick partitions per bilinear term")
    sp.add_argument("--cycle-model", choices=("mccormick", "exact"))
    sp.add_argument("--budget", action="append", metavar="KIND=PCT", help="robust budget, e.g. price=40")
    sp.add_argument("--no-tighten", action="store_true", help="skip McCormick bound tightening")
    sp.add_argument("--lp", help="also write the full big-M model as a CPLEX LP file")
    sp.add_argument("--out", help="directory for report.json, summary.csv and traces")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="sensitivity sweep over one parameter")
    common(sp)
    sp.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    sp.add_argument("--values", type=float, nargs="+", required=True)
    sp.add_argument("--mode", choices=("det", "robust"))
    sp.add_argument("--workers", type=int)
    sp.add_argument("--no-traces", action="store_true")
    sp.add_argument("--out", default="sweep_out")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("qa", help="relaxation quality audit (fix decisions and re-solve)")
    common(sp)
    sp.add_argument("--max-gap", type=float, default=0.01, help="allowed savings gap in percent")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_qa)

    sp = sub.add_parser("report", help="print a summary of an emitted report directory")
    sp.add_argument("dir")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, IngestionError, AssemblyError, FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, NotOptimal) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except QaFailure as exc:
        print(f"QA failure: {exc}", file=sys.stderr)
        return EXIT_QA


if __name__ == "__main__":
    sys.exit(main())
