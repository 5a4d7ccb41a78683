"""Budgeted-uncertainty robust sizing for price, demand and PV forecasts.

Each uncertain series varies within ``forecast * (1 +/- half_width)``, and the
adversary may push at most ``budget`` minutes of the day to their worst case.
The inner max is dualised (Bertsimas-Sim), so the robust model stays a MILP:
a scalar alpha and per-step beta price the protection, with
``Gamma * alpha + sum beta`` bounding the worst-case deviation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .model_ir import LinExpr, Model, Var, quicksum
from .sizing_det import (
    BuildContext,
    VarMap,
    add_energy_balance,
    add_grid_exchange,
    add_grid_exclusivity,
    build_operational,
    set_objective,
)
from .scenario_store import MINUTES_PER_DAY


@dataclass(frozen=True)
class UncertaintySpec:
    half_width: float  # fraction of the forecast
    budget: float  # minutes of the day at worst case, in [0, 1440]

    def __post_init__(self):
        if not 0.0 <= self.half_width < 1.0:
            raise ValueError("half width must lie in [0, 1)")
        if not 0.0 <= self.budget <= MINUTES_PER_DAY:
            raise ValueError(f"budget must lie in [0, {MINUTES_PER_DAY}] minutes")

    @classmethod
    def from_percent(cls, half_width: float, budget_pct: float) -> UncertaintySpec:
        return cls(half_width, MINUTES_PER_DAY * budget_pct / 100.0)

    def steps(self, step_minutes: int) -> float:
        return self.budget / step_minutes


@dataclass
class RobustVars:
    alpha_price: Var | None = None
    beta_price: list[Var] = field(default_factory=list)
    sigma_price: list[list[Var]] = field(default_factory=list)
    alpha_demand: Var | None = None
    beta_demand: list[list[Var]] = field(default_factory=list)
    sigma_demand: list[list[Var]] = field(default_factory=list)
    alpha_pv: Var | None = None
    beta_pv: list[list[Var]] = field(default_factory=list)
    sigma_pv: list[list[Var]] = field(default_factory=list)
    price_term: LinExpr = field(default_factory=LinExpr)

    def all_vars(self) -> list[Var]:
        out = [v for v in (self.alpha_price, self.alpha_demand, self.alpha_pv) if v is not None]
        out += self.beta_price
        for rows in (self.sigma_price, self.beta_demand, self.sigma_demand, self.beta_pv, self.sigma_pv):
            for row in rows:
                out += row
        return out


def build_bounds(forecast, half_width: float) -> tuple[np.ndarray, np.ndarray]:
    f = np.asarray(forecast, dtype=float)
    if np.any(f < 0):
        raise ValueError("forecast must be nonnegative")
    return (1.0 - half_width) * f, (1.0 + half_width) * f


def add_price_robust(model: Model, ctx: BuildContext, vm: VarMap, spec: UncertaintySpec,
                     absolute: bool = True, rv: RobustVars | None = None) -> RobustVars:
    """Protect the operating cost against at most Gamma steps of price deviation.

    Every step t carries a deviation cost sum_j w_j * (upper - lower)/2 * sigma_j(t),
    with sigma bounding the grid exposure. ``absolute`` makes sigma bound
    |E_ac| so that export revenue is protected too; otherwise only imports.
    """
    rv = rv or RobustVars()
    T = ctx.n_steps
    gamma = spec.steps(ctx.scenarios.step_minutes)
    weights = ctx.weights()
    rv.alpha_price = model.add_var("alpha_price")
    rv.beta_price = [model.add_var(f"beta_price[{t}]") for t in range(T)]
    for jj, j in enumerate(vm.ids):
        row = []
        for t in range(T):
            s = model.add_var(f"sigma_price[{j}][{t}]")
            model.add_constr(s - vm.e_ac[jj][t] >= 0, f"sig_price_pos[{j}][{t}]")
            if absolute:
                model.add_constr(s + vm.e_ac[jj][t] >= 0, f"sig_price_neg[{j}][{t}]")
            row.append(s)
        rv.sigma_price.append(row)
    for t in range(T):
        dev = LinExpr()
        for jj, (sc, w) in enumerate(zip(ctx.scenarios.scenarios, weights)):
            lo, hi = build_bounds(sc.price[t : t + 1], spec.half_width)
            coef = w * float(hi[0] - lo[0]) / 2.0
            if coef:
                dev.add_term(rv.sigma_price[jj][t], coef)
        model.add_constr(rv.alpha_price + rv.beta_price[t] - dev >= 0, f"price_dual[{t}]")
    rv.price_term = gamma * rv.alpha_price + quicksum(rv.beta_price)
    return rv


def _fraction(spec: UncertaintySpec | None, step_minutes: int, n_steps: int) -> float:
    return 0.0 if spec is None else spec.steps(step_minutes) / n_steps


def add_demand_pv_robust(model: Model, ctx: BuildContext, vm: VarMap,
                         demand: UncertaintySpec | None, pv: UncertaintySpec | None,
                         rv: RobustVars | None = None) -> RobustVars:
    """Energy balance with worst-case demand inflation and PV deflation.

    The per-step protection is ``G * alpha + beta_j(t)`` where G is the
    budget as a fraction of the day's steps: G = 0 recovers the nominal
    balance, G = 1 forces every step to its full deviation.
    """
    rv = rv or RobustVars()
    T, dt, eta = ctx.n_steps, ctx.dt, ctx.eta
    sm = ctx.scenarios.step_minutes
    g_d = _fraction(demand, sm, T)
    g_pv = _fraction(pv, sm, T)
    hw_d = 0.0 if demand is None else demand.half_width
    hw_pv = 0.0 if pv is None else pv.half_width
    scen = ctx.scenarios.scenarios
    dev_d = [hw_d * sc.demand for sc in scen]  # (upper - lower) / 2, kWh
    dev_pv = [hw_pv * sc.pv_per_unit for sc in scen]  # per kW of rating
    pv_cap = ctx.options.pv_cap_max if ctx.options.fix_pv is None else ctx.options.fix_pv
    max_d = max(float(d.max(initial=0.0)) for d in dev_d)
    max_pv = pv_cap * max(float(d.max(initial=0.0)) for d in dev_pv)
    # optimal duals never exceed the largest single-step deviation, so these
    # caps cut nothing off and keep the big-M import bound valid
    rv.alpha_demand = model.add_var("alpha_demand", ub=max_d)
    rv.alpha_pv = model.add_var("alpha_pv", ub=max_pv)
    for jj, sc in enumerate(scen):
        j = sc.id
        bd, sd, bp, sp = [], [], [], []
        for t in range(T):
            b_d = model.add_var(f"beta_demand[{j}][{t}]", ub=float(dev_d[jj][t]))
            s_d = model.add_var(f"sigma_demand[{j}][{t}]", lb=1.0)
            b_p = model.add_var(f"beta_pv[{j}][{t}]", ub=float(dev_pv[jj][t]) * pv_cap)
            s_p = model.add_var(f"sigma_pv[{j}][{t}]")
            model.add_constr(rv.alpha_demand + b_d - float(dev_d[jj][t]) * s_d >= 0, f"demand_dual[{j}][{t}]")
            model.add_constr(rv.alpha_pv + b_p - float(dev_pv[jj][t]) * s_p >= 0, f"pv_dual[{j}][{t}]")
            model.add_constr(s_p - vm.p_pv >= 0, f"sig_pv[{j}][{t}]")
            lhs = eta * vm.e_imp[jj][t] - vm.e_exp[jj][t] / eta
            rhs = (
                float(sc.demand[t]) + vm.e_ch[jj][t] - vm.e_dch[jj][t] - dt * vm.p_pv_t[jj][t]
                + g_d * rv.alpha_demand + b_d + dt * (g_pv * rv.alpha_pv + b_p)
            )
            model.add_constr(lhs == rhs, f"balance[{j}][{t}]")
            bd.append(b_d)
            sd.append(s_d)
            bp.append(b_p)
            sp.append(s_p)
        rv.beta_demand.append(bd)
        rv.sigma_demand.append(sd)
        rv.beta_pv.append(bp)
        rv.sigma_pv.append(sp)
    add_grid_exchange(model, ctx, vm)
    return rv


def import_slack(ctx: BuildContext, demand: UncertaintySpec | None, pv: UncertaintySpec | None) -> list[np.ndarray]:
    """Extra import energy the robust balance can demand at each step."""
    pv_cap = ctx.options.pv_cap_max if ctx.options.fix_pv is None else ctx.options.fix_pv
    hw_d = 0.0 if demand is None else demand.half_width
    hw_pv = 0.0 if pv is None else pv.half_width
    scen = ctx.scenarios.scenarios
    max_d = max(hw_d * float(sc.demand.max(initial=0.0)) for sc in scen)
    max_pv = max(hw_pv * pv_cap * float(sc.pv_per_unit.max(initial=0.0)) for sc in scen)
    return [
        hw_d * sc.demand + max_d + ctx.dt * (hw_pv * pv_cap * sc.pv_per_unit + max_pv)
        for sc in scen
    ]


def build_robust_model(ctx: BuildContext, price: UncertaintySpec | None = None,
                       demand: UncertaintySpec | None = None, pv: UncertaintySpec | None = None,
                       absolute: bool = True) -> tuple[Model, VarMap, RobustVars]:
    """Sizing model with any subset of the three uncertainties protected."""
    model = Model("xfcs_robust")
    rv = RobustVars()
    if demand is not None or pv is not None:
        ctx.import_slack = import_slack(ctx, demand, pv)

        def balance(m, c, v):
            add_demand_pv_robust(m, c, v, demand, pv, rv)

        vm = build_operational(model, ctx, balance)
    else:
        vm = build_operational(model, ctx, add_energy_balance)
    if price is not None:
        add_price_robust(model, ctx, vm, price, absolute, rv)
    if ctx.options.exclusivity == "full":
        add_grid_exclusivity(model, ctx, vm)
    set_objective(model, ctx, vm, rv.price_term if price is not None else None)
    return model, vm, rv


def worst_case_price_term(exposure: np.ndarray, prices: np.ndarray, weights, half_width: float,
                          budget_steps: int, absolute: bool = True) -> float:
    """Brute-force worst case: choose at most ``budget_steps`` steps and a
    deviation sign for every scenario at each, maximising the extra operating cost.

    ``exposure`` and ``prices`` are (scenarios, steps) arrays. Exponential in
    the number of steps; meant for small oracle instances only.
    """
    exposure = np.asarray(exposure, dtype=float)
    prices = np.asarray(prices, dtype=float)
    w = np.asarray(weights, dtype=float)[:, None]
    n_scen, n_steps = exposure.shape
    e = exposure if absolute else np.maximum(exposure, 0.0)
    best = 0.0
    for k in range(min(budget_steps, n_steps) + 1):
        for chosen in itertools.combinations(range(n_steps), k):
            cols = list(chosen)
            for signs in itertools.product((-1.0, 1.0), repeat=k * n_scen):
                delta = np.zeros_like(prices)
                delta[:, cols] = np.reshape(signs, (n_scen, k)) * half_width * prices[:, cols]
                best = max(best, float((w * delta * e).sum()))
    return best
