"""Sensitivity sweeps over price level, investment cost, departure time and port count.

Each sweep is written to its own directory under ``--out``. For the price
and investment sweeps the script also reports the PV adoption threshold:
the first grid point where the PV rating drops below (or rises above) one
kW, which should move in the expected direction (PV needs high prices and
cheap hardware).

    python scripts/sensitivity.py --sweep EPM ICM --workers 4
"""

import argparse
import logging
from pathlib import Path

import numpy as np

from xfcs.analysis import emit_report, run_sweep
from xfcs.config import StudyConfig

GRIDS = {
    "EPM": list(np.round(np.arange(0.2, 2.01, 0.2), 2)),
    "ICM": list(np.round(np.arange(0.4, 2.01, 0.2), 2)),
    "departure_mean_shift": [-120, -60, 0, 60, 120],
    "n_ports": [2, 3, 4, 5],
}


def pv_threshold(reports, rising: bool):
    """First swept value with PV installed (rising) or dropped (not rising)."""
    for r in reports:
        has_pv = r.decision.p_pv >= 1.0
        if has_pv == rising:
            return r.value
    return None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--sweep", nargs="+", choices=sorted(GRIDS), default=sorted(GRIDS))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/sensitivity")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = StudyConfig.load(args.config) if args.config else StudyConfig()
    for param in args.sweep:
        reports, failures = run_sweep(cfg, param, GRIDS[param], args.workers)
        for f in failures:
            print(f"FAILED {f}")
        print(f"{param:>22s} {'C kWh':>9s} {'P kW':>8s} {'PV kW':>8s} {'invest':>10s} {'OpC':>11s} {'savings %':>9s}")
        for r in reports:
            d = r.decision
            print(f"{r.value:22g} {d.c_bess:9.1f} {d.p_bess:8.1f} {d.p_pv:8.1f} {d.investment:10.2f} "
                  f"{d.costs['OpC']:11.2f} {r.savings_pct:9.2f}")
        if param == "EPM":
            print(f"PV first installed at EPM = {pv_threshold(reports, rising=True)}")
        if param == "ICM":
            print(f"PV first dropped at ICM = {pv_threshold(reports, rising=False)}")
        if reports:
            emit_report(reports, Path(args.out) / param, traces=False)


if __name__ == "__main__":
    main()
