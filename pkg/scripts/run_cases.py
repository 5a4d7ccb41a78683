"""Base case, Case I (no degradation) and Case II (degradation-constrained).

Writes report.json, summary.csv, relaxation_qa.csv and per-scenario traces.

    python scripts/run_cases.py --out results/cases
"""

import argparse
import logging
import time

from xfcs.analysis import emit_report, run_base_case, run_case
from xfcs.config import StudyConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="study configuration JSON")
    ap.add_argument("--out", default="results/cases")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = StudyConfig.load(args.config) if args.config else StudyConfig()
    sset = cfg.scenarios()
    base = run_base_case(cfg, sset)
    reports = [base]
    for label, overrides in (("case I", {"degradation": False}), ("case II", {})):
        t0 = time.perf_counter()
        rep = run_case(cfg, sset, base.objective, "det", label, **overrides)
        d = rep.decision
        print(f"{label:8s} C={d.c_bess:8.1f} kWh  P={d.p_bess:7.1f} kW  DoD={d.dod:5.1f} %  "
              f"cycles={d.annual_cycles:6.1f}/yr  PV={d.p_pv:6.1f} kW  total={rep.objective:11.2f} $/yr  "
              f"savings={rep.savings_pct:5.2f} %  EOL={rep.eol_years:5.1f} yr  ({time.perf_counter() - t0:.0f} s)")
        reports.append(rep)
    print(f"base     total={base.objective:11.2f} $/yr  peak import={base.decision.annual_max:.1f} kW")
    emit_report(reports, args.out)


if __name__ == "__main__":
    main()
