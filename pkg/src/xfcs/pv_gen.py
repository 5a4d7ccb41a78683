"""Per-unit PV generation from irradiance and ambient temperature."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MINUTES_PER_DAY = 1440
DERATE = 0.92


@dataclass(frozen=True)
class PvParams:
    noct: float = 45.0  # degC
    temp_coeff: float = 0.007  # 1/degC
    derate: float = DERATE
    losses_pct: float = 14.0  # informational only

    def __post_init__(self):
        if self.noct <= 20:
            raise ValueError("NOCT must exceed the 20 degC reference ambient")
        if self.temp_coeff < 0:
            raise ValueError("temperature coefficient must be nonnegative")


@dataclass(frozen=True)
class WeatherSeries:
    irradiance: np.ndarray  # W/m2, one value per minute
    ambient_temp: np.ndarray  # degC

    def __post_init__(self):
        irr = np.asarray(self.irradiance, dtype=float)
        amb = np.asarray(self.ambient_temp, dtype=float)
        if irr.shape != (MINUTES_PER_DAY,) or amb.shape != (MINUTES_PER_DAY,):
            raise ValueError(f"weather series must have {MINUTES_PER_DAY} values")
        if np.any(irr < 0) or not np.all(np.isfinite(irr)) or not np.all(np.isfinite(amb)):
            raise ValueError("irradiance must be finite and nonnegative")
        object.__setattr__(self, "irradiance", irr)
        object.__setattr__(self, "ambient_temp", amb)

    @classmethod
    def from_hourly(cls, irradiance, ambient_temp) -> WeatherSeries:
        """Linearly interpolate 24 hourly samples (taken at the top of each hour) to minutes."""
        return cls(hourly_to_minutes(irradiance), hourly_to_minutes(ambient_temp))


def hourly_to_minutes(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.shape != (24,):
        raise ValueError("expected 24 hourly values")
    minutes = np.arange(MINUTES_PER_DAY) / 60.0
    # wrap hour 24 back to hour 0 so the day is periodic
    return np.interp(minutes, np.arange(25), np.append(v, v[0]))


def cell_temperature_delta(irradiance, ambient_temp, params: PvParams):
    """Absolute deviation of the estimated cell temperature from 25 degC."""
    irr = np.asarray(irradiance, dtype=float)
    amb = np.asarray(ambient_temp, dtype=float)
    return np.abs(25.0 - (amb + (params.noct - 20.0) * irr / 800.0))


def per_unit_output(irradiance, ambient_temp, params: PvParams):
    dt = cell_temperature_delta(irradiance, ambient_temp, params)
    pu = params.derate * np.asarray(irradiance, dtype=float) * (1.0 - params.temp_coeff * dt) / 1000.0
    return np.maximum(pu, 0.0)


def per_unit_profile(weather: WeatherSeries, params: PvParams) -> np.ndarray:
    """Per-unit (kW per kW installed) output for each minute of the day."""
    return per_unit_output(weather.irradiance, weather.ambient_temp, params)
