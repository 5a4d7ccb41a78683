"""Robust sizing over uncertainty budgets, one uncertainty at a time and jointly.

    python scripts/robust_budgets.py --grid 0 50 100 --no-tighten
"""

import argparse
import logging
from pathlib import Path

from xfcs.analysis import emit_report, run_base_case, run_case
from xfcs.config import StudyConfig

KINDS = ("price", "demand", "pv")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--grid", type=float, nargs="+", default=[0, 20, 40, 60, 80, 100])
    ap.add_argument("--kinds", nargs="+", choices=KINDS + ("joint",), default=["price", "joint"])
    ap.add_argument("--no-tighten", action="store_true", help="solve the plain McCormick relaxation once")
    ap.add_argument("--out", default="results/robust")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = StudyConfig.load(args.config) if args.config else StudyConfig()
    sset = cfg.scenarios()
    base = run_base_case(cfg, sset)
    tighten = False if args.no_tighten else None
    for kind in args.kinds:
        reports = []
        for g in args.grid:
            budgets = {k: g for k in KINDS} if kind == "joint" else {kind: g}
            rep = run_case(cfg, sset, base.objective, "robust", f"{kind}={g:g}", budgets, tighten=tighten)
            rep.parameter, rep.value = f"{kind}_budget", g
            d = rep.decision
            print(f"{kind:6s} {g:5.0f} %  C={d.c_bess:8.1f}  P={d.p_bess:7.1f}  PV={d.p_pv:6.1f}  "
                  f"invest={d.investment:10.2f}  demand charges={d.demand_charges:10.2f}  total={rep.objective:11.2f}")
            reports.append(rep)
        emit_report(reports, Path(args.out) / kind, traces=False)


if __name__ == "__main__":
    main()
