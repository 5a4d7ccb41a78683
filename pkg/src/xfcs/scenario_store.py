"""Input parameters, series ingestion and the eight-scenario representative year."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .fleet_demand import DemandProfile
from .pv_gen import PvParams, WeatherSeries, hourly_to_minutes, per_unit_profile

MINUTES_PER_DAY = 1440
SEASONS = ("winter", "spring", "summer", "fall")
DAY_TYPES = ("weekend", "weekday")
WEEKLY_WEIGHT = {"weekend": 2.0 / 7.0, "weekday": 5.0 / 7.0}


class IngestionError(ValueError):
    pass


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class TariffParams:
    lambda_mdc: float = 10.0  # $/kW per monthly peak
    lambda_adc: float = 18.0  # $/kW per annual peak
    window_minutes: int = 15
    month_scale: float = 3.0  # months per season

    def __post_init__(self):
        if self.window_minutes <= 0 or MINUTES_PER_DAY % self.window_minutes:
            raise ValueError("demand window must divide the 1440-minute day")

    @property
    def windows_per_day(self) -> int:
        return MINUTES_PER_DAY // self.window_minutes


@dataclass(frozen=True)
class CostParams:
    bess_power_capex: float = 300.0  # $/kW
    bess_om: float = 0.0  # $/kW/yr
    bess_energy_capex: float = 695.0  # $/kWh
    bess_install: float = 3.6  # $/kWh
    pv_capex: float = 2277.0  # $/kW
    pv_om: float = 21.0  # $/kW/yr
    interest: float = 0.04
    lifetime: int = 20  # years
    days_per_year: float = 365.0
    seasons: int = 4

    def __post_init__(self):
        if self.lifetime < 1:
            raise ValueError("lifetime must be at least one year")
        if self.interest < 0:
            raise ValueError("interest rate must be nonnegative")

    def scaled_capex(self, k: float) -> CostParams:
        """Scale every investment (not O&M) cost by ``k``."""
        return replace(
            self,
            bess_power_capex=self.bess_power_capex * k,
            bess_energy_capex=self.bess_energy_capex * k,
            bess_install=self.bess_install * k,
            pv_capex=self.pv_capex * k,
        )


@dataclass(frozen=True)
class BessTech:
    eta_ch: float = 0.98
    eta_dch: float = 0.98
    eta_acdc: float = 0.95
    eta_dcdc: float = 0.95
    ramp: float = 20.0  # kWh per minute
    ratio_bounds: tuple[float, float] = (1.0, 8.0)  # hours of energy per kW
    energy_bounds: tuple[float, float] = (0.0, 6000.0)  # kWh
    dod_bounds: tuple[float, float] = (0.2, 1.0)  # fraction
    cycle_bounds: tuple[float, float] | None = None  # derived from the curve when None
    demand_cap: float | None = None  # kWh per step; derived from demand when None

    def __post_init__(self):
        for name in ("eta_ch", "eta_dch", "eta_acdc", "eta_dcdc"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        for name in ("ratio_bounds", "energy_bounds", "dod_bounds", "cycle_bounds"):
            b = getattr(self, name)
            if b is not None and not b[0] <= b[1]:
                raise ValueError(f"{name} must be ordered (low, high)")
        if not 0.0 < self.dod_bounds[1] <= 1.0 or self.dod_bounds[0] < 0.0:
            raise ValueError("DoD bounds are fractions in [0, 1]")

    @property
    def eta_conv(self) -> float:
        return self.eta_acdc * self.eta_dcdc


@dataclass(frozen=True)
class CycleLifeCurve:
    """Lifetime equivalent full cycles allowed at each depth of discharge (%)."""

    breakpoints: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(d), float(c)) for d, c in self.breakpoints)
        if len(pts) < 2:
            raise ValueError("cycle-life curve needs at least two breakpoints")
        if any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
            raise ValueError("cycle-life DoD breakpoints must be strictly increasing")
        if any(b[1] >= a[1] for a, b in zip(pts, pts[1:])):
            raise ValueError("cycle-life cycles must be strictly decreasing")
        object.__setattr__(self, "breakpoints", pts)

    @property
    def dods(self) -> np.ndarray:
        return np.array([d for d, _ in self.breakpoints])

    @property
    def cycles(self) -> np.ndarray:
        return np.array([c for _, c in self.breakpoints])

    def cycles_at(self, dod_pct: float) -> float:
        return float(np.interp(dod_pct, self.dods, self.cycles))


# ---------------------------------------------------------------------------
# series


_KIND_RULES = {
    # kind: (column names accepted, minimum allowed, hourly expansion)
    "price": (("price", "usd_per_kwh", "value"), 0.0, "step"),
    "demand": (("kwh", "demand", "value"), 0.0, None),
    "irradiance": (("irradiance_w_m2", "irradiance", "value"), 0.0, "linear"),
    "ambient": (("ambient_c", "ambient", "value"), -math.inf, "linear"),
    "pv": (("pv_per_unit", "value"), 0.0, "linear"),
}


def load_series(path, kind: str) -> np.ndarray:
    """Read one column of a CSV into a 1440-value minute series.

    24-row (hourly) files are expanded: prices are held constant within the
    hour, weather is interpolated linearly. Raises :class:`IngestionError`
    naming the offending row.
    """
    if kind not in _KIND_RULES:
        raise ValueError(f"unknown series kind {kind!r}")
    names, minimum, expand = _KIND_RULES[kind]
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = {h.strip().lower(): h for h in (reader.fieldnames or [])}
        col = next((header[n] for n in names if n in header), None)
        if col is None:
            raise IngestionError(f"{path}: no column among {names} for kind {kind!r}")
        values = []
        for row_no, row in enumerate(reader, start=2):
            try:
                v = float(row[col])
            except (TypeError, ValueError):
                raise IngestionError(f"{path}: row {row_no}: unparseable value {row[col]!r}") from None
            if not math.isfinite(v):
                raise IngestionError(f"{path}: row {row_no}: non-finite value")
            if v < minimum:
                raise IngestionError(f"{path}: row {row_no}: negative {kind} value {v}")
            values.append(v)
    arr = np.asarray(values)
    if arr.size == MINUTES_PER_DAY:
        return arr
    if arr.size == 24 and expand == "step":
        return np.repeat(arr, 60)
    if arr.size == 24 and expand == "linear":
        return hourly_to_minutes(arr)
    raise IngestionError(f"{path}: expected {MINUTES_PER_DAY} rows (or 24 hourly rows), got {arr.size}")


def load_weather(path) -> WeatherSeries:
    return WeatherSeries(load_series(path, "irradiance"), load_series(path, "ambient"))


def write_series(path, values, column: str, index: str = "minute") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([index, column])
        for k, v in enumerate(values):
            w.writerow([k, repr(float(v))])


def write_weather(path, weather: WeatherSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["minute", "irradiance_w_m2", "ambient_c"])
        for k, (g, t) in enumerate(zip(weather.irradiance, weather.ambient_temp)):
            w.writerow([k, repr(float(g)), repr(float(t))])


# ---------------------------------------------------------------------------
# scenarios


@dataclass
class Scenario:
    id: int
    season: str
    day_type: str
    weekly_weight: float
    price: np.ndarray  # $/kWh per step
    demand: np.ndarray  # kWh per step
    pv_per_unit: np.ndarray  # kW/kW per step

    def __post_init__(self):
        self.price = np.asarray(self.price, dtype=float)
        self.demand = np.asarray(self.demand, dtype=float)
        self.pv_per_unit = np.asarray(self.pv_per_unit, dtype=float)
        n = self.price.size
        if self.demand.size != n or self.pv_per_unit.size != n:
            raise AssemblyError(f"scenario {self.id}: series lengths differ")
        if np.any(self.price < 0):
            raise AssemblyError(f"scenario {self.id}: negative price")
        if np.any(self.demand < 0) or np.any(self.pv_per_unit < 0):
            raise AssemblyError(f"scenario {self.id}: negative demand or PV")


@dataclass
class ScenarioSet:
    scenarios: list[Scenario]
    step_minutes: int = 1
    days_per_year: float = 365.0
    seasons: int = 4

    @property
    def n_steps(self) -> int:
        return MINUTES_PER_DAY // self.step_minutes

    @property
    def dt(self) -> float:
        """Step length in hours."""
        return self.step_minutes / 60.0

    @property
    def days_per_season(self) -> float:
        return self.days_per_year / self.seasons

    def weight(self, sc: Scenario) -> float:
        """Days per year represented by one day of ``sc``."""
        return self.days_per_season * sc.weekly_weight

    def season_groups(self) -> dict[str, list[Scenario]]:
        groups: dict[str, list[Scenario]] = {}
        for sc in self.scenarios:
            groups.setdefault(sc.season, []).append(sc)
        return groups

    def demand_peak(self) -> float:
        """Largest per-step demand energy over all scenarios (kWh)."""
        return max((float(sc.demand.max(initial=0.0)) for sc in self.scenarios), default=0.0)

    def resample(self, step_minutes: int) -> ScenarioSet:
        """Coarsen to ``step_minutes``: energies are summed, prices and per-unit PV averaged."""
        if step_minutes == self.step_minutes:
            return self
        if step_minutes % self.step_minutes or MINUTES_PER_DAY % step_minutes:
            raise ValueError(f"cannot resample {self.step_minutes}-min data to {step_minutes} min")
        k = step_minutes // self.step_minutes
        out = []
        for sc in self.scenarios:
            out.append(
                replace(
                    sc,
                    price=sc.price.reshape(-1, k).mean(axis=1),
                    demand=sc.demand.reshape(-1, k).sum(axis=1),
                    pv_per_unit=sc.pv_per_unit.reshape(-1, k).mean(axis=1),
                )
            )
        return replace(self, scenarios=out, step_minutes=step_minutes)

    def scale_prices(self, k: float) -> ScenarioSet:
        return replace(self, scenarios=[replace(sc, price=sc.price * k) for sc in self.scenarios])

    def subset(self, ids) -> ScenarioSet:
        keep = set(ids)
        return replace(self, scenarios=[sc for sc in self.scenarios if sc.id in keep])

    # -- archive -----------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "step_minutes": self.step_minutes,
            "days_per_year": self.days_per_year,
            "seasons": self.seasons,
            "scenarios": [
                {
                    "id": sc.id,
                    "season": sc.season,
                    "day_type": sc.day_type,
                    "weekly_weight": sc.weekly_weight,
                    "price": sc.price.tolist(),
                    "demand": sc.demand.tolist(),
                    "pv_per_unit": sc.pv_per_unit.tolist(),
                }
                for sc in self.scenarios
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> ScenarioSet:
        return cls(
            [Scenario(**s) for s in d["scenarios"]],
            int(d["step_minutes"]),
            float(d["days_per_year"]),
            int(d["seasons"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> ScenarioSet:
        return cls.from_dict(json.loads(Path(path).read_text()))


def assemble_scenarios(
    weather: dict[str, WeatherSeries],
    prices: dict[str, np.ndarray],
    weekday: DemandProfile,
    weekend: DemandProfile,
    pv: PvParams,
    costs: CostParams | None = None,
) -> ScenarioSet:
    """Scenarios 1-4 are the winter..fall weekends, 5-8 the matching weekdays."""
    costs = costs or CostParams()
    for s in SEASONS:
        if s not in weather:
            raise AssemblyError(f"missing weather for season {s!r}")
        if s not in prices:
            raise AssemblyError(f"missing prices for season {s!r}")
    demand = {"weekend": weekend.energy, "weekday": weekday.energy}
    scenarios = []
    for d_idx, day_type in enumerate(DAY_TYPES):
        for s_idx, season in enumerate(SEASONS):
            price = np.asarray(prices[season], dtype=float)
            if price.size == 24:
                price = np.repeat(price, 60)
            scenarios.append(
                Scenario(
                    id=4 * d_idx + s_idx + 1,
                    season=season,
                    day_type=day_type,
                    weekly_weight=WEEKLY_WEIGHT[day_type],
                    price=price,
                    demand=np.asarray(demand[day_type], dtype=float),
                    pv_per_unit=per_unit_profile(weather[season], pv),
                )
            )
    return ScenarioSet(scenarios, 1, costs.days_per_year, costs.seasons)


def params_to_dict(obj) -> dict:
    return asdict(obj)
