"""Deterministic XFCS sizing MILP: BESS energy/power/DoD and PV rating.

The model is assembled constraint family by constraint family over a
:class:`~xfcs.scenario_store.ScenarioSet`. Time-indexed quantities are
energies per step (kWh); ratings are kW. All window lengths and ramp limits
given per minute are rescaled to the step length of the scenario set.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .model_ir import BINARY, LinExpr, Model, Solution, Var, quicksum, solve
from .scenario_store import BessTech, CostParams, CycleLifeCurve, ScenarioSet, TariffParams

COST_KEYS = ("MDC", "ADC", "IC&OM_BESS", "IC&OM_PV", "OpC")


def annuity_factor(interest: float, lifetime: int) -> float:
    """Capital recovery factor z(1+z)^L / ((1+z)^L - 1); 1/L when z = 0."""
    if interest == 0:
        return 1.0 / lifetime
    g = (1.0 + interest) ** lifetime
    return interest * g / (g - 1.0)


@dataclass
class DetOptions:
    degradation: bool = True
    partitions: int = 1  # McCormick grid per bilinear term; >1 uses the piecewise hull
    pv_cap_max: float = 300.0  # kW
    fix_pv: float | None = None  # kW
    fix_bess: tuple[float, float] | None = None  # (kWh, kW)
    fix_dod: float | None = None  # fraction
    c_bounds: tuple[float, float] | None = None  # overrides tech.energy_bounds
    psi_bounds: tuple[float, float] | None = None  # annual cycles
    # big-M direction binaries: "full" emits them for every step, "lazy" only
    # where a relaxed solve actually imports and exports (or charges and
    # discharges) at once, "none" never
    exclusivity: str = "lazy"
    # "mccormick" relaxes Psi*C and DoD*C; "exact" weights capacity by curve segment
    cycle_model: str = "mccormick"

    def __post_init__(self):
        if self.partitions < 1:
            raise ValueError("partitions must be >= 1")
        if self.exclusivity not in ("full", "lazy", "none"):
            raise ValueError(f"unknown exclusivity mode {self.exclusivity!r}")
        if self.cycle_model not in ("mccormick", "exact"):
            raise ValueError(f"unknown cycle model {self.cycle_model!r}")


@dataclass
class VarMap:
    """Handles for every decision variable, indexed ``[j][t]`` for time series."""

    ids: list[int]
    e_imp: list[list[Var]]
    e_exp: list[list[Var]]
    e_ac: list[list[Var]]
    u_grid: dict[tuple[int, int], Var]  # (scenario position, step) -> binary
    u_bess: dict[tuple[int, int], Var]
    e_ch: list[list[Var]]
    e_dch: list[list[Var]]
    e_bess: list[list[Var]]  # T+1 entries: index 0 is the start-of-day level
    p_pv_t: list[list[Var]]
    p_pv: Var
    c_bess: Var
    p_bess: Var
    dod: Var | None = None
    psi: Var | None = None
    y: Var | None = None
    omega: Var | None = None
    rho: list[Var] = field(default_factory=list)
    zeta: Var | None = None
    cap_share: list[Var] = field(default_factory=list)  # exact cycle model only
    throughput: Var | None = None  # annual discharge energy, kWh/yr
    p_avg: list[list[Var]] = field(default_factory=list)
    p_daily: list[Var] = field(default_factory=list)
    p_month: dict[str, Var] = field(default_factory=dict)
    p_annual: Var | None = None
    cost: dict[str, LinExpr] = field(default_factory=dict)


@dataclass
class BuildContext:
    """Everything a constraint family needs besides the model itself."""

    scenarios: ScenarioSet
    tech: BessTech
    tariff: TariffParams
    costs: CostParams
    curve: CycleLifeCurve | None
    options: DetOptions
    # per-scenario, per-step widening of the big-M import bound (robust terms)
    import_slack: list[np.ndarray] | None = None

    @property
    def n_steps(self) -> int:
        return self.scenarios.n_steps

    @property
    def dt(self) -> float:
        return self.scenarios.dt

    @property
    def eta(self) -> float:
        return self.tech.eta_conv

    @property
    def demand_cap(self) -> float:
        """Largest per-step demand energy; caps P_rated * dt."""
        if self.tech.demand_cap is not None:
            return self.tech.demand_cap * self.scenarios.step_minutes
        return self.scenarios.demand_peak()

    @property
    def c_bounds(self) -> tuple[float, float]:
        """Box for C_BESS; a fixed capacity collapses it, making the envelopes exact."""
        if self.options.fix_bess is not None:
            c = float(self.options.fix_bess[0])
            return c, c
        return self.options.c_bounds or self.tech.energy_bounds

    def weights(self) -> list[float]:
        return [self.scenarios.weight(sc) for sc in self.scenarios.scenarios]

    def window_steps(self) -> int:
        w = self.tariff.window_minutes
        step = self.scenarios.step_minutes
        if w % step:
            raise ValueError(f"demand window of {w} min is not a multiple of the {step}-min step")
        return w // step

    def big_m(self, j: int) -> tuple[np.ndarray, np.ndarray, float]:
        """Per-step big-M for import and export, and the BESS direction M.

        Import can at most cover demand plus full-rate BESS charging;
        export at most full-rate discharging plus all PV at the rating cap.
        """
        sc = self.scenarios.scenarios[j]
        e_max = self.demand_cap
        pv_cap = self.options.pv_cap_max if self.options.fix_pv is None else self.options.fix_pv
        extra = 0.0 if self.import_slack is None else self.import_slack[j]
        m_imp = (sc.demand + extra + e_max) / self.eta
        m_exp = self.eta * (e_max + pv_cap * sc.pv_per_unit * self.dt)
        return m_imp + 1e-6, m_exp + 1e-6, e_max + 1e-6


# ---------------------------------------------------------------------------
# variables


def add_variables(model: Model, ctx: BuildContext) -> VarMap:
    sset, opt = ctx.scenarios, ctx.options
    T = ctx.n_steps
    ids = [sc.id for sc in sset.scenarios]

    def series(prefix, kind="C", lb=0.0, ub=math.inf, n=T):
        return [[model.add_var(f"{prefix}[{j}][{t}]", kind, lb, ub) for t in range(n)] for j in ids]

    vm = VarMap(
        ids=ids,
        e_imp=series("Eimp"),
        e_exp=series("Eexp"),
        e_ac=series("Eac", lb=-math.inf),
        u_grid={},
        u_bess={},
        e_ch=series("Ech"),
        e_dch=series("Edch"),
        e_bess=series("Ebess", n=T + 1),
        p_pv_t=series("Ppv"),
        p_pv=model.add_var("P_PV", ub=opt.pv_cap_max),
        c_bess=model.add_var("C_BESS", lb=ctx.c_bounds[0], ub=ctx.c_bounds[1]),
        p_bess=model.add_var("P_BESS", ub=ctx.demand_cap / ctx.dt),
    )
    if opt.fix_pv is not None:
        model.fix(vm.p_pv, opt.fix_pv)
    if opt.fix_bess is not None:
        model.fix(vm.c_bess, opt.fix_bess[0])
        model.fix(vm.p_bess, opt.fix_bess[1])
    return vm


# ---------------------------------------------------------------------------
# constraint families


def add_energy_balance(model: Model, ctx: BuildContext, vm: VarMap) -> None:
    """Import/export through the converter chain meets demand, BESS flows and PV."""
    eta, dt = ctx.eta, ctx.dt
    for jj, sc in enumerate(ctx.scenarios.scenarios):
        for t in range(ctx.n_steps):
            lhs = eta * vm.e_imp[jj][t] - vm.e_exp[jj][t] / eta
            rhs = vm.e_ch[jj][t] - vm.e_dch[jj][t] - dt * vm.p_pv_t[jj][t] + float(sc.demand[t])
            model.add_constr(lhs == rhs, f"balance[{sc.id}][{t}]")
    add_grid_exchange(model, ctx, vm)


def add_grid_exchange(model: Model, ctx: BuildContext, vm: VarMap) -> None:
    for jj, j in enumerate(vm.ids):
        for t in range(ctx.n_steps):
            model.add_constr(vm.e_ac[jj][t] == vm.e_imp[jj][t] - vm.e_exp[jj][t], f"exchange[{j}][{t}]")


def _all_cells(ctx: BuildContext):
    return [(jj, t) for jj in range(len(ctx.scenarios.scenarios)) for t in range(ctx.n_steps)]


def add_grid_exclusivity(model: Model, ctx: BuildContext, vm: VarMap, cells=None) -> None:
    """Import and export never overlap: E+ <= M u1, E- <= M (1 - u1).

    ``cells`` restricts the binaries to selected (scenario position, step)
    pairs; by default every step gets one.
    """
    cells = _all_cells(ctx) if cells is None else cells
    bounds = {}
    for jj, t in cells:
        if (jj, t) in vm.u_grid:
            continue
        if jj not in bounds:
            bounds[jj] = ctx.big_m(jj)
        m_imp, m_exp, _ = bounds[jj]
        j = vm.ids[jj]
        u = vm.u_grid[jj, t] = model.add_var(f"u1[{j}][{t}]", BINARY)
        model.add_constr(vm.e_imp[jj][t] - float(m_imp[t]) * u <= 0, f"imp_on[{j}][{t}]")
        model.add_constr(vm.e_exp[jj][t] + float(m_exp[t]) * u <= float(m_exp[t]), f"exp_on[{j}][{t}]")


def add_bess_exclusivity(model: Model, ctx: BuildContext, vm: VarMap, cells=None) -> None:
    """Charge and discharge never overlap: E_ch <= M u2, E_dch <= M (1 - u2)."""
    cells = _all_cells(ctx) if cells is None else cells
    _, _, m = ctx.big_m(0)
    for jj, t in cells:
        if (jj, t) in vm.u_bess:
            continue
        j = vm.ids[jj]
        u = vm.u_bess[jj, t] = model.add_var(f"u2[{j}][{t}]", BINARY)
        model.add_constr(vm.e_ch[jj][t] - m * u <= 0, f"ch_on[{j}][{t}]")
        model.add_constr(vm.e_dch[jj][t] + m * u <= m, f"dch_on[{j}][{t}]")


def add_pv_limits(model: Model, ctx: BuildContext, vm: VarMap) -> None:
    for jj, sc in enumerate(ctx.scenarios.scenarios):
        for t in range(ctx.n_steps):
            pu = float(sc.pv_per_unit[t])
            if pu <= 0.0:
                model.set_bounds(vm.p_pv_t[jj][t], 0.0, 0.0)
            else:
                model.add_constr(vm.p_pv_t[jj][t] - pu * vm.p_pv <= 0, f"pv_avail[{sc.id}][{t}]")


def add_bess_operation(model: Model, ctx: BuildContext, vm: VarMap) -> None:
    tech, dt, T = ctx.tech, ctx.dt, ctx.n_steps
    ramp = tech.ramp * ctx.scenarios.step_minutes
    for jj, j in enumerate(vm.ids):
        eb, ech, edch = vm.e_bess[jj], vm.e_ch[jj], vm.e_dch[jj]
        for t in range(T):
            model.add_constr(
                eb[t + 1] == eb[t] + tech.eta_ch * ech[t] - edch[t] / tech.eta_dch, f"soc_dyn[{j}][{t}]"
            )
            model.add_constr(ech[t] - dt * vm.p_bess <= 0, f"ch_rate[{j}][{t}]")
            model.add_constr(edch[t] - dt * vm.p_bess <= 0, f"dch_rate[{j}][{t}]")
            # headroom and availability refer to the level at the start of the step
            model.add_constr(ech[t] + eb[t] - vm.c_bess <= 0, f"headroom[{j}][{t}]")
            model.add_constr(edch[t] - eb[t] <= 0, f"available[{j}][{t}]")
            model.add_constr(eb[t + 1] - eb[t] <= ramp, f"ramp_up[{j}][{t}]")
            model.add_constr(eb[t + 1] - eb[t] >= -ramp, f"ramp_dn[{j}][{t}]")
        model.add_constr(
            quicksum(edch) / tech.eta_dch - tech.eta_ch * quicksum(ech) == 0, f"neutral[{j}]"
        )
        for t in range(T + 1):
            model.add_constr(eb[t] - vm.c_bess <= 0, f"soc_max[{j}][{t}]")
    if ctx.options.exclusivity == "full":
        add_bess_exclusivity(model, ctx, vm)


def add_sizing_coupling(model: Model, ctx: BuildContext, vm: VarMap) -> None:
    lo, hi = ctx.tech.ratio_bounds
    model.add_constr(ctx.dt * vm.p_bess <= ctx.demand_cap, "rating_cap")
    model.add_constr(vm.c_bess - lo * vm.p_bess >= 0, "ratio_lo")
    model.add_constr(vm.c_bess - hi * vm.p_bess <= 0, "ratio_hi")


def add_demand_charge(model: Model, ctx: BuildContext, vm: VarMap) -> None:
    """Window-average import power and its daily, seasonal and annual maxima."""
    k = ctx.window_steps()
    n_win = ctx.n_steps // k
    dt = ctx.dt
    vm.p_annual = model.add_var("Pmax_an")
    for jj, j in enumerate(vm.ids):
        day = model.add_var(f"Pmax_day[{j}]")
        vm.p_daily.append(day)
        row = []
        for w in range(n_win):
            avg = model.add_var(f"Pavg[{j}][{w}]")
            window = quicksum(vm.e_imp[jj][w * k : (w + 1) * k])
            model.add_constr(avg - window / (k * dt) == 0, f"win_avg[{j}][{w}]")
            model.add_constr(day - avg >= 0, f"day_max[{j}][{w}]")
            row.append(avg)
        vm.p_avg.append(row)
    for season, members in ctx.scenarios.season_groups().items():
        mo = model.add_var(f"Pmax_mo[{season}]")
        vm.p_month[season] = mo
        for sc in members:
            jj = vm.ids.index(sc.id)
            model.add_constr(mo - vm.p_daily[jj] >= 0, f"mo_max[{season}][{sc.id}]")
        model.add_constr(vm.p_annual - mo >= 0, f"an_max[{season}]")


def annual_discharge(ctx: BuildContext, vm: VarMap) -> LinExpr:
    """Weighted annual discharge energy drawn from the cells (kWh/yr)."""
    eta = ctx.tech.eta_dch
    out = LinExpr()
    for jj, w in enumerate(ctx.weights()):
        for v in vm.e_dch[jj]:
            out.add_term(v, w / eta)
    return out


def add_cycle_accounting(model: Model, ctx: BuildContext, vm: VarMap) -> None:
    """Annual equivalent full cycles Psi, via Y ~ Psi * C_BESS."""
    vm.throughput = model.add_var("throughput")
    model.add_constr(vm.throughput - annual_discharge(ctx, vm) == 0, "throughput_def")
    if not ctx.options.degradation or ctx.options.cycle_model == "exact":
        return
    psi_lo, psi_hi = psi_bounds(ctx)
    vm.psi = model.add_var("Psi", lb=psi_lo, ub=psi_hi)
    vm.y = model.add_var("Y", lb=-math.inf)
    model.add_constr(vm.y - vm.throughput == 0, "cycles_def")
    add_bilinear(model, vm.y, vm.psi, vm.c_bess, (psi_lo, psi_hi), ctx.c_bounds, ctx.options.partitions, "mcY")


def psi_bounds(ctx: BuildContext) -> tuple[float, float]:
    if ctx.options.psi_bounds is not None:
        return ctx.options.psi_bounds
    if ctx.curve is None:
        raise ValueError("degradation modelling needs a cycle-life curve")
    dod_lo = _dod_range(ctx)[0]
    return 0.0, ctx.curve.cycles_at(100.0 * dod_lo) / ctx.costs.lifetime


def _dod_range(ctx: BuildContext) -> tuple[float, float]:
    lo, hi = ctx.tech.dod_bounds
    d = ctx.curve.dods / 100.0
    lo, hi = max(lo, float(d[0])), min(hi, float(d[-1]))
    if lo > hi:
        raise ValueError("DoD bounds do not overlap the cycle-life curve")
    return lo, hi


def add_cycle_life(model: Model, ctx: BuildContext, vm: VarMap) -> None:
    """Piecewise-linear cycle life in DoD (SOS2) and the DoD-dependent SoC floor.

    The curve gives lifetime cycles; dividing by the project lifetime turns it
    into the annual allowance that keeps the battery in service for the whole
    horizon without replacement.
    """
    if not ctx.options.degradation:
        return
    if ctx.options.cycle_model == "exact":
        add_cycle_life_exact(model, ctx, vm)
        return
    curve, life = ctx.curve, ctx.costs.lifetime
    dod_lo, dod_hi = _dod_range(ctx)
    if ctx.options.fix_dod is not None:
        dod_lo = dod_hi = float(np.clip(ctx.options.fix_dod, dod_lo, dod_hi))
    vm.dod = model.add_var("DoD", lb=dod_lo, ub=dod_hi)
    vm.zeta = model.add_var("zeta")
    vm.rho = [model.add_var(f"rho[{s}]", ub=1.0) for s in range(len(curve.breakpoints))]
    model.add_constr(quicksum(vm.rho) == 1, "rho_sum")
    model.add_constr(vm.dod - quicksum((d / 100.0) * r for d, r in zip(curve.dods, vm.rho)) == 0, "dod_interp")
    model.add_constr(vm.zeta - quicksum(c * r for c, r in zip(curve.cycles, vm.rho)) == 0, "zeta_interp")
    model.add_sos2(vm.rho, list(curve.dods), "cycle_life")
    model.add_constr(vm.psi - vm.zeta / life <= 0, "cycle_limit")
    vm.omega = model.add_var("omega")
    add_bilinear(model, vm.omega, vm.dod, vm.c_bess, (dod_lo, dod_hi), ctx.c_bounds, ctx.options.partitions, "mcW")
    for jj, j in enumerate(vm.ids):
        for t, eb in enumerate(vm.e_bess[jj]):
            model.add_constr(eb - vm.c_bess + vm.omega >= 0, f"soc_min[{j}][{t}]")


def add_cycle_life_exact(model: Model, ctx: BuildContext, vm: VarMap) -> None:
    """Bilinear-free cycle-life coupling.

    Capacity is split into shares q_s >= 0 over the curve breakpoints with
    sum q_s = C_BESS and q in an SOS2 set, so q_s / C_BESS are interpolation
    weights. Then DoD*C = sum d_s q_s and zeta(DoD)*C = sum zeta_s q_s are
    linear, and the cycle limit becomes throughput <= sum zeta_s q_s / L.
    """
    curve, life = ctx.curve, ctx.costs.lifetime
    dod_lo, dod_hi = _dod_range(ctx)
    c_hi = ctx.c_bounds[1]
    vm.cap_share = [model.add_var(f"q[{s}]", ub=c_hi) for s in range(len(curve.breakpoints))]
    model.add_constr(quicksum(vm.cap_share) - vm.c_bess == 0, "share_sum")
    model.add_sos2(vm.cap_share, list(curve.dods), "cycle_life")
    vm.omega = model.add_var("omega")
    model.add_constr(vm.omega - quicksum((d / 100.0) * q for d, q in zip(curve.dods, vm.cap_share)) == 0, "omega_def")
    if ctx.options.fix_dod is not None:
        d = float(np.clip(ctx.options.fix_dod, dod_lo, dod_hi))
        model.add_constr(vm.omega - d * vm.c_bess == 0, "dod_fixed")
    else:
        model.add_constr(vm.omega - dod_lo * vm.c_bess >= 0, "dod_lo")
        model.add_constr(vm.omega - dod_hi * vm.c_bess <= 0, "dod_hi")
    allowance = quicksum((c / life) * q for c, q in zip(curve.cycles, vm.cap_share))
    model.add_constr(vm.throughput - allowance <= 0, "cycle_limit")
    for jj, j in enumerate(vm.ids):
        for t, eb in enumerate(vm.e_bess[jj]):
            model.add_constr(eb - vm.c_bess + vm.omega >= 0, f"soc_min[{j}][{t}]")


def add_bilinear(model: Model, z: Var, x: Var, y: Var, xb, yb, partitions: int, name: str) -> None:
    """Relax z = x*y over the box xb x yb.

    With one partition this is the four-inequality McCormick envelope. With
    N > 1 both ranges are split into N equal pieces and the convex hull of the
    union of the N*N cell envelopes is modelled exactly with one binary per
    cell and disaggregated copies of x and y.
    """
    xl, xu = map(float, xb)
    yl, yu = map(float, yb)
    if partitions == 1:
        for k, rel in enumerate(_envelope(z, x, y, xl, xu, yl, yu)):
            model.add_constr(rel, f"{name}_env{k}")
        return
    n = partitions
    xs = np.linspace(xl, xu, n + 1)
    ys = np.linspace(yl, yu, n + 1)
    cells = [(a, b) for a in range(n) for b in range(n)]
    g = {c: model.add_var(f"{name}_g[{c[0]}][{c[1]}]", BINARY) for c in cells}
    xh = {c: model.add_var(f"{name}_x[{c[0]}][{c[1]}]", lb=-math.inf) for c in cells}
    yh = {c: model.add_var(f"{name}_y[{c[0]}][{c[1]}]", lb=-math.inf) for c in cells}
    model.add_constr(quicksum(g.values()) == 1, f"{name}_one")
    model.add_constr(x - quicksum(xh.values()) == 0, f"{name}_xsum")
    model.add_constr(y - quicksum(yh.values()) == 0, f"{name}_ysum")
    for (a, b) in cells:
        tag = f"[{a}][{b}]"
        model.add_constr(xh[a, b] - xs[a] * g[a, b] >= 0, f"{name}_xlo{tag}")
        model.add_constr(xh[a, b] - xs[a + 1] * g[a, b] <= 0, f"{name}_xhi{tag}")
        model.add_constr(yh[a, b] - ys[b] * g[a, b] >= 0, f"{name}_ylo{tag}")
        model.add_constr(yh[a, b] - ys[b + 1] * g[a, b] <= 0, f"{name}_yhi{tag}")
    # summed cell envelopes: z >= / <= sum over cells of the cell's McCormick planes
    lo1 = LinExpr()
    lo2 = LinExpr()
    up1 = LinExpr()
    up2 = LinExpr()
    for (a, b) in cells:
        x0, x1, y0, y1 = xs[a], xs[a + 1], ys[b], ys[b + 1]
        c = (a, b)
        lo1 += x0 * yh[c] + y0 * xh[c] - (x0 * y0) * g[c]
        lo2 += x1 * yh[c] + y1 * xh[c] - (x1 * y1) * g[c]
        up1 += x1 * yh[c] + y0 * xh[c] - (x1 * y0) * g[c]
        up2 += x0 * yh[c] + y1 * xh[c] - (x0 * y1) * g[c]
    model.add_constr(z - lo1 >= 0, f"{name}_env0")
    model.add_constr(z - lo2 >= 0, f"{name}_env1")
    model.add_constr(z - up1 <= 0, f"{name}_env2")
    model.add_constr(z - up2 <= 0, f"{name}_env3")


def _envelope(z, x, y, xl, xu, yl, yu):
    return (
        z - xl * y - yl * x >= -xl * yl,
        z - xu * y - yu * x >= -xu * yu,
        z - xu * y - yl * x <= -xu * yl,
        z - xl * y - yu * x <= -xl * yu,
    )


def set_objective(model: Model, ctx: BuildContext, vm: VarMap, extra: LinExpr | None = None) -> None:
    tar, cst = ctx.tariff, ctx.costs
    cf = annuity_factor(cst.interest, cst.lifetime)
    cost = {
        "MDC": tar.month_scale * tar.lambda_mdc * quicksum(vm.p_month.values()),
        "ADC": tar.lambda_adc * vm.p_annual,
        "IC&OM_BESS": (cst.bess_energy_capex + cst.bess_install) * cf * vm.c_bess
        + (cst.bess_power_capex * cf + cst.bess_om) * vm.p_bess,
        "IC&OM_PV": (cst.pv_capex * cf + cst.pv_om) * vm.p_pv,
        "OpC": operating_cost(ctx, vm),
    }
    if extra is not None:
        cost["Robust"] = extra
    vm.cost = cost
    model.minimize(quicksum(cost.values()))


def operating_cost(ctx: BuildContext, vm: VarMap, prices=None) -> LinExpr:
    """Weighted annual cost of energy exchanged with the grid ($/yr)."""
    out = LinExpr()
    for jj, (sc, w) in enumerate(zip(ctx.scenarios.scenarios, ctx.weights())):
        p = sc.price if prices is None else prices[jj]
        for t, v in enumerate(vm.e_ac[jj]):
            if p[t]:
                out.add_term(v, w * float(p[t]))
    return out


# ---------------------------------------------------------------------------
# assembly


def build_context(scenarios, tech=None, tariff=None, costs=None, curve=None, options=None) -> BuildContext:
    return BuildContext(
        scenarios,
        tech or BessTech(),
        tariff or TariffParams(),
        costs or CostParams(),
        curve,
        options or DetOptions(),
    )


def build_operational(model: Model, ctx: BuildContext, balance=add_energy_balance) -> VarMap:
    """All constraint families except the objective; ``balance`` may be swapped."""
    vm = add_variables(model, ctx)
    balance(model, ctx, vm)
    add_pv_limits(model, ctx, vm)
    add_bess_operation(model, ctx, vm)
    add_sizing_coupling(model, ctx, vm)
    add_demand_charge(model, ctx, vm)
    add_cycle_accounting(model, ctx, vm)
    add_cycle_life(model, ctx, vm)
    return vm


def build_det_model(ctx: BuildContext) -> tuple[Model, VarMap]:
    model = Model("xfcs_det")
    vm = build_operational(model, ctx)
    if ctx.options.exclusivity == "full":
        add_grid_exclusivity(model, ctx, vm)
    set_objective(model, ctx, vm)
    return model, vm


def overlap_cells(sol: Solution, vm: VarMap, tol: float = 1e-9):
    """(scenario position, step) pairs where import/export or charge/discharge overlap."""
    x = sol.values

    def both(a, b):
        ia = np.array([[v.index for v in row] for row in a])
        ib = np.array([[v.index for v in row] for row in b])
        hit = np.minimum(x[ia], x[ib]) > tol
        return [tuple(map(int, c)) for c in np.argwhere(hit)]

    return both(vm.e_imp, vm.e_exp), both(vm.e_ch, vm.e_dch)


def solve_model(model: Model, ctx: BuildContext, vm: VarMap, config=None, max_rounds: int = 20) -> Solution:
    """Solve, adding direction binaries lazily when the mode is "lazy".

    Every round solves a relaxation of the fully big-M-constrained model.
    Once a round's solution has no overlapping flows it is feasible, and
    therefore optimal, for the full model.
    """
    sol = solve(model, config)
    if ctx.options.exclusivity != "lazy":
        return sol
    for _ in range(max_rounds):
        if not sol.has_values:
            return sol
        grid, bess = overlap_cells(sol, vm)
        if not grid and not bess:
            return sol
        add_grid_exclusivity(model, ctx, vm, grid)
        add_bess_exclusivity(model, ctx, vm, bess)
        sol = solve(model, config)
    add_grid_exclusivity(model, ctx, vm)
    add_bess_exclusivity(model, ctx, vm)
    return solve(model, config)


# ---------------------------------------------------------------------------
# results


@dataclass
class ScenarioTrace:
    id: int
    e_imp: np.ndarray
    e_exp: np.ndarray
    e_ch: np.ndarray
    e_dch: np.ndarray
    e_bess: np.ndarray  # T+1 levels
    p_pv: np.ndarray
    soc: np.ndarray  # percent
    window_avg: np.ndarray  # kW, recomputed from imports
    demand: np.ndarray
    price: np.ndarray


@dataclass
class SizingDecision:
    c_bess: float  # kWh
    p_bess: float  # kW
    dod: float  # percent; nan when degradation is off
    annual_cycles: float  # equivalent full cycles per year, throughput / C_BESS
    psi_model: float  # cycle variable as seen by the relaxed model
    allowed_cycles: float  # lifetime cycles at the chosen DoD (nan when off)
    p_pv: float  # kW
    monthly_max: dict[str, float]  # kW, recomputed
    annual_max: float  # kW, recomputed
    monthly_max_model: dict[str, float]
    annual_max_model: float
    costs: dict[str, float]
    objective: float
    status: str
    solve_seconds: float = 0.0
    mip_gap: float = math.nan
    soc_floor: float = 0.0  # kWh, lowest level the solved model allowed (C - omega)
    traces: list[ScenarioTrace] = field(default_factory=list, repr=False)

    @property
    def investment(self) -> float:
        return self.costs["IC&OM_BESS"] + self.costs["IC&OM_PV"]

    @property
    def demand_charges(self) -> float:
        return self.costs["MDC"] + self.costs["ADC"]

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("traces")
        return d

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(_jsonable(self.summary()), indent=2, sort_keys=True))

    def write_traces(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        out = []
        for tr in self.traces:
            p = directory / f"scenario_{tr.id}.csv"
            k = len(tr.e_imp) // max(1, len(tr.window_avg))
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["step", "price", "demand_kwh", "import_kwh", "export_kwh", "charge_kwh",
                            "discharge_kwh", "bess_kwh", "soc_pct", "pv_kw", "window_avg_kw"])
                for t in range(len(tr.e_imp)):
                    w.writerow([t, tr.price[t], tr.demand[t], tr.e_imp[t], tr.e_exp[t], tr.e_ch[t],
                                tr.e_dch[t], tr.e_bess[t + 1], tr.soc[t + 1], tr.p_pv[t], tr.window_avg[t // k]])
            out.append(p)
        return out


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return None if math.isnan(float(x)) else float(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


class NotOptimal(RuntimeError):
    pass


def window_maxima(e_imp: np.ndarray, window_steps: int, dt: float) -> np.ndarray:
    """Average import power (kW) over consecutive windows."""
    return np.asarray(e_imp).reshape(-1, window_steps).sum(axis=1) / (window_steps * dt)


def extract_decision(sol: Solution, ctx: BuildContext, vm: VarMap, accept_limit: bool = False) -> SizingDecision:
    ok = sol.is_optimal or (accept_limit and sol.has_values)
    if not ok:
        raise NotOptimal(f"solver status {sol.status}: {sol.message}")
    x = sol.values

    def arr(rows):
        return np.array([[x[v.index] for v in row] for row in rows])

    e_imp, e_exp = arr(vm.e_imp), arr(vm.e_exp)
    e_ch, e_dch, e_b, p_pv = arr(vm.e_ch), arr(vm.e_dch), arr(vm.e_bess), arr(vm.p_pv_t)
    c = max(sol.value(vm.c_bess), 0.0)
    k = ctx.window_steps()
    traces = []
    daily = {}
    for jj, sc in enumerate(ctx.scenarios.scenarios):
        wins = window_maxima(e_imp[jj], k, ctx.dt)
        daily[sc.id] = float(wins.max(initial=0.0))
        soc = 100.0 * e_b[jj] / c if c > 1e-9 else np.zeros_like(e_b[jj])
        traces.append(ScenarioTrace(sc.id, e_imp[jj], e_exp[jj], e_ch[jj], e_dch[jj], e_b[jj], p_pv[jj],
                                    soc, wins, sc.demand, sc.price))
    monthly = {s: max(daily[sc.id] for sc in members) for s, members in ctx.scenarios.season_groups().items()}
    throughput = sol.value(vm.throughput)
    psi = sol.value(vm.psi) if vm.psi is not None else math.nan
    if c <= 1e-9:
        dod = math.nan  # no battery, no depth of discharge
    elif vm.dod is not None:
        dod = sol.value(vm.dod)
    elif vm.cap_share:
        dod = sol.value(vm.omega) / c
    elif not ctx.options.degradation:
        dod = 1.0  # no SoC floor: the full capacity is usable
    else:
        dod = math.nan
    costs = {k: float(sol.value(e)) for k, e in vm.cost.items()}
    return SizingDecision(
        c_bess=c,
        p_bess=sol.value(vm.p_bess),
        dod=100.0 * dod,
        annual_cycles=throughput / c if c > 1e-9 else 0.0,
        psi_model=psi,
        allowed_cycles=ctx.curve.cycles_at(100.0 * dod) if ctx.curve and not math.isnan(dod) else math.nan,
        p_pv=sol.value(vm.p_pv),
        monthly_max=monthly,
        annual_max=max(monthly.values()),
        monthly_max_model={s: sol.value(v) for s, v in vm.p_month.items()},
        annual_max_model=sol.value(vm.p_annual),
        costs=costs,
        objective=sol.objective,
        status=sol.status,
        solve_seconds=sol.solve_seconds,
        mip_gap=sol.mip_gap,
        soc_floor=c - sol.value(vm.omega) if vm.omega is not None else 0.0,
        traces=traces,
    )
