"""Small instances shared by the model tests.

``tiny_set`` builds eight scenarios on an hourly grid (24 steps) with an
evening demand peak, a midday PV bump and a price spread wide enough to make
storage worth buying, so full MILP solves take well under a second.
"""

import numpy as np
import pytest

from xfcs import synthetic
from xfcs.scenario_store import SEASONS, BessTech, CycleLifeCurve, Scenario, ScenarioSet, TariffParams
from xfcs.sizing_det import DetOptions, build_context

HOURS = np.arange(24)


def tiny_set(step_minutes: int = 60, scale: float = 1.0, seed: int = 0) -> ScenarioSet:
    rng = np.random.default_rng(seed)
    n = 1440 // step_minutes
    hours = np.arange(n) * step_minutes / 60.0
    scen = []
    for i in range(8):
        season = SEASONS[i % 4]
        weekday = i >= 4
        base = 300.0 if weekday else 220.0
        demand = base * (0.3 + np.exp(-((hours - 18.0) ** 2) / 6.0)) * scale * step_minutes / 60.0
        demand *= 1.0 + 0.1 * rng.random(n)
        price = 0.08 + 0.14 * (np.abs(hours - 18.0) < 3.5) + 0.01 * (i % 4)
        pv = np.clip(np.sin(np.pi * (hours - 6.0) / 12.0), 0.0, None) * (0.5 + 0.1 * (i % 4))
        scen.append(Scenario(i + 1, season, "weekday" if weekday else "weekend", 5 / 7 if weekday else 2 / 7,
                             price, demand, pv))
    return ScenarioSet(scen, step_minutes)


def tiny_ctx(step_minutes: int = 60, tech=None, tariff=None, curve=None, **opts):
    sset = tiny_set(step_minutes)
    tariff = tariff or TariffParams(window_minutes=max(15, step_minutes))
    curve = curve or CycleLifeCurve(tuple(synthetic.cycle_life_points()))
    tech = tech or BessTech(energy_bounds=(0.0, 4000.0))
    return build_context(sset, tech, tariff, None, curve, DetOptions(**opts))


@pytest.fixture
def ctx_factory():
    return tiny_ctx


# verdicts recorded by the acceptance checks: number -> (PASS|FAIL, title, detail)
ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        verdict, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {verdict}  {title}" + (f"  [{detail}]" if detail else ""))
