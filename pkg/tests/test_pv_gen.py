import numpy as np
import pytest
from hypothesis import given, strategies as st

from xfcs.pv_gen import (
    PvParams,
    WeatherSeries,
    cell_temperature_delta,
    hourly_to_minutes,
    per_unit_output,
    per_unit_profile,
)

P = PvParams()


@pytest.mark.parametrize(
    "irr, amb, want",
    [(800, 20, 20.0), (0, 25, 0.0), (0, 30, 5.0), (400, 10, 2.5)],
)
def test_cell_temperature_delta(irr, amb, want):
    assert cell_temperature_delta(irr, amb, P) == pytest.approx(want)


def test_nominal_output():
    assert per_unit_output(800, 20, P) == pytest.approx(0.92 * 800 * (1 - 0.007 * 20) / 1000)
    assert per_unit_output(800, 20, P) == pytest.approx(0.63296)


def test_night_is_zero():
    assert per_unit_output(0.0, -5.0, P) == 0.0


def test_extreme_heat_clamps_to_zero():
    hot = PvParams(temp_coeff=0.05)
    assert per_unit_output(1000, 60, hot) == 0.0


def test_cold_cell_is_not_rewarded():
    # cell at -15 degC: the absolute value turns 40 degC of cold into a loss
    assert per_unit_output(800, -40, P) == pytest.approx(0.92 * 0.8 * (1 - 0.007 * 40))
    assert per_unit_output(800, -40, P) < per_unit_output(800, 0, P)


@given(st.floats(0, 1400), st.floats(-40, 50))
def test_output_bounds(irr, amb):
    pu = per_unit_output(irr, amb, P)
    assert 0.0 <= pu <= 0.92 * irr / 1000 + 1e-12


def test_hourly_expansion():
    hours = np.arange(24, dtype=float)
    m = hourly_to_minutes(hours)
    assert m.shape == (1440,)
    assert m[0] == 0.0 and m[60] == 1.0 and m[90] == pytest.approx(1.5)
    # last hour interpolates back towards hour 0
    assert m[1439] == pytest.approx(23 * (1 - 59 / 60))


def test_weather_validation():
    with pytest.raises(ValueError):
        WeatherSeries(np.zeros(100), np.zeros(100))
    bad = np.zeros(1440)
    bad[3] = -1
    with pytest.raises(ValueError):
        WeatherSeries(bad, np.zeros(1440))
    with pytest.raises(ValueError):
        PvParams(noct=20)


def test_profile_shape():
    w = WeatherSeries.from_hourly([0] * 6 + [400] * 12 + [0] * 6, [15] * 24)
    pu = per_unit_profile(w, P)
    assert pu.shape == (1440,)
    assert pu[0] == 0.0 and pu[12 * 60] > 0.3
