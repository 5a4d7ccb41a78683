"""JSON study configuration and the scenario set it describes."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import synthetic
from .fleet_demand import (
    CvParams,
    DemandProfile,
    DrivingProfile,
    FleetConfig,
    StationConfig,
    generate_profiles,
    read_profile_csv,
)
from .model_ir import SolverConfig
from .pv_gen import PvParams
from .scenario_store import (
    SEASONS,
    BessTech,
    CostParams,
    CycleLifeCurve,
    ScenarioSet,
    TariffParams,
    assemble_scenarios,
    load_series,
    load_weather,
)
from .sizing_det import DetOptions


class ConfigError(ValueError):
    pass


@dataclass
class InputPaths:
    """Optional CSV inputs; anything left unset falls back to the illustrative defaults."""

    prices: dict[str, str] = field(default_factory=dict)  # season -> CSV
    weather: dict[str, str] = field(default_factory=dict)  # season -> CSV
    demand_weekday: str | None = None
    demand_weekend: str | None = None
    cycle_life: str | None = None  # CSV with columns dod_pct,cycles


@dataclass
class RobustSettings:
    price_half_width: float = 0.20
    demand_half_width: float = 0.10
    pv_half_width: float = 0.20
    price_budget_pct: float = 0.0  # percent of the day's steps
    demand_budget_pct: float = 0.0
    pv_budget_pct: float = 0.0
    absolute_exposure: bool = True  # protect exports as well as imports


@dataclass
class SolverSettings:
    backend: str = "highs"
    executable: str | None = None
    time_limit: float = 600.0
    mip_gap: float = 1e-4
    workers: int = 1

    def solver_config(self) -> SolverConfig:
        return SolverConfig.from_env(
            SolverConfig(
                backend=self.backend,
                executable=self.executable,
                time_limit=self.time_limit,
                mip_gap=self.mip_gap,
            )
        )


@dataclass
class StudyConfig:
    step_minutes: int = 5
    fleet: FleetConfig = field(default_factory=FleetConfig)
    station: StationConfig = field(default_factory=StationConfig)
    cv: CvParams = field(default_factory=CvParams)
    driving: DrivingProfile = field(default_factory=synthetic.driving_profile)
    pv: PvParams = field(default_factory=PvParams)
    tariff: TariffParams = field(default_factory=TariffParams)
    costs: CostParams = field(default_factory=CostParams)
    tech: BessTech = field(default_factory=BessTech)
    options: DetOptions = field(default_factory=DetOptions)
    robust: RobustSettings = field(default_factory=RobustSettings)
    solver: SolverSettings = field(default_factory=SolverSettings)
    inputs: InputPaths = field(default_factory=InputPaths)
    price_multiplier: float = 1.0
    capex_multiplier: float = 1.0
    base_dir: str = "."

    # -- io ----------------------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict, base_dir=".") -> StudyConfig:
        data = dict(data)
        data.setdefault("base_dir", str(base_dir))
        try:
            return _decode(cls, data)
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> StudyConfig:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data, base_dir=path.parent)

    def to_dict(self) -> dict:
        return _encode(self)

    def save(self, path) -> None:
        d = self.to_dict()
        d.pop("base_dir", None)
        Path(path).write_text(json.dumps(d, indent=2))

    def resolve(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else Path(self.base_dir) / q

    # -- inputs ------------------------------------------------------------
    def curve(self) -> CycleLifeCurve:
        if self.inputs.cycle_life:
            with open(self.resolve(self.inputs.cycle_life), newline="") as fh:
                rows = [(float(r["dod_pct"]), float(r["cycles"])) for r in csv.DictReader(fh)]
            return CycleLifeCurve(tuple(rows))
        return CycleLifeCurve(tuple(synthetic.cycle_life_points()))

    def demand(self) -> tuple[DemandProfile, DemandProfile]:
        """(weekday, weekend) profiles, read from CSV or simulated from the fleet model."""
        if self.inputs.demand_weekday and self.inputs.demand_weekend:
            return (
                read_profile_csv(self.resolve(self.inputs.demand_weekday), "weekday"),
                read_profile_csv(self.resolve(self.inputs.demand_weekend), "weekend"),
            )
        return generate_profiles(self.fleet, self.station, self.driving, self.cv)

    def scenarios(self, demand=None) -> ScenarioSet:
        weekday, weekend = demand or self.demand()
        weather, prices = {}, {}
        for s in SEASONS:
            w = self.inputs.weather.get(s)
            weather[s] = load_weather(self.resolve(w)) if w else synthetic.weather(s)
            p = self.inputs.prices.get(s)
            prices[s] = load_series(self.resolve(p), "price") if p else np.repeat(synthetic.hourly_prices(s), 60)
        sset = assemble_scenarios(weather, prices, weekday, weekend, self.pv, self.costs)
        if self.price_multiplier != 1.0:
            sset = sset.scale_prices(self.price_multiplier)
        return sset.resample(self.step_minutes)

    def effective_costs(self) -> CostParams:
        return self.costs if self.capex_multiplier == 1.0 else self.costs.scaled_capex(self.capex_multiplier)


# ---------------------------------------------------------------------------
# dataclass <-> JSON


def _encode(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _encode(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def _decode(tp, value):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if value is None:
        return None
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"expected an object for {tp.__name__}, got {value!r}")
        hints = typing.get_type_hints(tp)
        names = {f.name for f in dataclasses.fields(tp)}
        unknown = set(value) - names
        if unknown:
            raise ConfigError(f"unknown {tp.__name__} field(s): {sorted(unknown)}")
        return tp(**{k: _decode(hints[k], v) for k, v in value.items()})
    if origin in (typing.Union, types.UnionType):
        non_none = [a for a in args if a is not type(None)]
        return _decode(non_none[0], value) if len(non_none) == 1 else value
    if origin is list:
        return [_decode(args[0], v) for v in value]
    if origin is tuple:
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_decode(args[0], v) for v in value)
        return tuple(_decode(a, v) for a, v in zip(args, value))
    if origin is dict:
        return {k: _decode(args[1], v) for k, v in value.items()}
    if tp is float:
        return float(value)
    if tp is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"expected an integer, got {value}")
        return int(value)
    return value
