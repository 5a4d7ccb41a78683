import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xfcs import synthetic
from xfcs.fleet_demand import DemandProfile
from xfcs.pv_gen import PvParams
from xfcs.scenario_store import (
    SEASONS,
    AssemblyError,
    BessTech,
    CostParams,
    CycleLifeCurve,
    IngestionError,
    Scenario,
    ScenarioSet,
    TariffParams,
    assemble_scenarios,
    load_series,
    load_weather,
    write_series,
    write_weather,
)


def _csv(path, header, values):
    path.write_text(header + "\n" + "\n".join(f"{i},{v}" for i, v in enumerate(values)) + "\n")
    return path


class TestLoadSeries:
    def test_hourly_prices_step_constant(self, tmp_path):
        p = _csv(tmp_path / "p.csv", "hour,price", [0.01 * h for h in range(24)])
        s = load_series(p, "price")
        assert s.shape == (1440,)
        assert np.all(s[60:120] == 0.01)

    def test_minute_file_unchanged(self, tmp_path):
        vals = np.linspace(0, 5, 1440)
        write_series(tmp_path / "d.csv", vals, "kWh")
        assert np.array_equal(load_series(tmp_path / "d.csv", "demand"), vals)

    def test_negative_irradiance_reports_row(self, tmp_path):
        vals = [0.0] * 24
        vals[5] = -3
        p = _csv(tmp_path / "w.csv", "hour,irradiance", vals)
        with pytest.raises(IngestionError, match="row 7"):
            load_series(p, "irradiance")

    def test_negative_ambient_allowed(self, tmp_path):
        p = _csv(tmp_path / "w.csv", "hour,ambient", [-10.0] * 24)
        assert load_series(p, "ambient").min() == -10.0

    @pytest.mark.parametrize("bad", ["nan", "abc"])
    def test_bad_values(self, tmp_path, bad):
        p = tmp_path / "p.csv"
        p.write_text("hour,price\n0,0.1\n1," + bad + "\n")
        with pytest.raises(IngestionError, match="row 3"):
            load_series(p, "price")

    def test_wrong_length(self, tmp_path):
        p = _csv(tmp_path / "p.csv", "hour,price", [0.1] * 30)
        with pytest.raises(IngestionError, match="got 30"):
            load_series(p, "price")

    def test_missing_column(self, tmp_path):
        p = _csv(tmp_path / "p.csv", "hour,foo", [0.1] * 24)
        with pytest.raises(IngestionError):
            load_series(p, "price")

    def test_weather_round_trip(self, tmp_path):
        w = synthetic.weather("summer")
        write_weather(tmp_path / "w.csv", w)
        back = load_weather(tmp_path / "w.csv")
        assert np.array_equal(back.irradiance, w.irradiance)
        assert np.array_equal(back.ambient_temp, w.ambient_temp)


def _inputs(weather=None):
    weather = weather or {s: synthetic.weather(s) for s in SEASONS}
    prices = {s: np.repeat(synthetic.hourly_prices(s), 60) for s in SEASONS}
    wd = DemandProfile("weekday", np.full(1440, 2.0))
    we = DemandProfile("weekend", np.full(1440, 1.0))
    return weather, prices, wd, we


class TestAssembly:
    def test_ids_and_weights(self):
        sset = assemble_scenarios(*_inputs(), PvParams())
        assert [sc.id for sc in sset.scenarios] == list(range(1, 9))
        winter_we = sset.scenarios[0]
        assert (winter_we.season, winter_we.day_type) == ("winter", "weekend")
        assert sset.scenarios[4].day_type == "weekday"
        assert sset.days_per_season == 91.25
        total = sum(sset.weight(sc) for sc in sset.scenarios)
        assert total == pytest.approx(365.0)
        for group in sset.season_groups().values():
            assert sum(sc.weekly_weight for sc in group) == pytest.approx(1.0)

    def test_identical_seasons_differ_only_in_demand(self):
        w = synthetic.weather("spring")
        weather, prices, wd, we = _inputs({s: w for s in SEASONS})
        prices = {s: prices["spring"] for s in SEASONS}
        sset = assemble_scenarios(weather, prices, wd, we, PvParams())
        a, b = sset.scenarios[0], sset.scenarios[5]
        assert np.array_equal(a.pv_per_unit, b.pv_per_unit) and np.array_equal(a.price, b.price)
        assert not np.array_equal(a.demand, b.demand)

    def test_missing_season(self):
        weather, prices, wd, we = _inputs()
        del weather["fall"]
        with pytest.raises(AssemblyError, match="fall"):
            assemble_scenarios(weather, prices, wd, we, PvParams())

    def test_resample_preserves_energy(self):
        sset = assemble_scenarios(*_inputs(), PvParams())
        coarse = sset.resample(5)
        assert coarse.n_steps == 288 and coarse.dt == pytest.approx(5 / 60)
        for a, b in zip(sset.scenarios, coarse.scenarios):
            assert b.demand.sum() == pytest.approx(a.demand.sum())
            assert b.price.mean() == pytest.approx(a.price.mean())
        with pytest.raises(ValueError):
            sset.resample(7)


scenario_sets = st.builds(
    lambda seed, step: _random_set(seed, step),
    st.integers(0, 10_000),
    st.sampled_from([1, 5, 15, 60]),
)


def _random_set(seed, step):
    rng = np.random.default_rng(seed)
    n = 1440 // step
    scen = [
        Scenario(i + 1, SEASONS[i % 4], "weekend" if i < 4 else "weekday", 2 / 7 if i < 4 else 5 / 7,
                 rng.random(n) * 0.3, rng.random(n) * 20, rng.random(n))
        for i in range(8)
    ]
    return ScenarioSet(scen, step)


@settings(max_examples=25, deadline=None)
@given(scenario_sets)
def test_archive_round_trip_is_bit_identical(tmp_path_factory, sset):
    path = tmp_path_factory.mktemp("arch") / "s.json"
    sset.save(path)
    back = ScenarioSet.load(path)
    assert back.step_minutes == sset.step_minutes
    for a, b in zip(sset.scenarios, back.scenarios):
        for name in ("price", "demand", "pv_per_unit"):
            assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
        assert (a.id, a.season, a.day_type, a.weekly_weight) == (b.id, b.season, b.day_type, b.weekly_weight)
    assert json.loads(path.read_text())["scenarios"][0]["id"] == 1


class TestParams:
    def test_cycle_curve_interpolates(self):
        c = CycleLifeCurve(((20, 10000), (40, 6000), (100, 2800)))
        assert c.cycles_at(40) == 6000
        assert c.cycles_at(30) == 8000
        assert c.cycles_at(70) == pytest.approx(4400)

    @pytest.mark.parametrize("pts", [((20, 100),), ((40, 10), (20, 5)), ((20, 100), (40, 200))])
    def test_bad_curves(self, pts):
        with pytest.raises(ValueError):
            CycleLifeCurve(pts)

    def test_default_curve_shape(self):
        c = CycleLifeCurve(tuple(synthetic.cycle_life_points()))
        assert np.all(np.diff(c.dods) > 0) and np.all(np.diff(c.cycles) < 0)

    def test_tariff_window_must_divide_day(self):
        assert TariffParams().windows_per_day == 96
        with pytest.raises(ValueError):
            TariffParams(window_minutes=7)

    def test_costs_and_tech(self):
        k = CostParams().scaled_capex(0.5)
        assert k.bess_energy_capex == pytest.approx(347.5) and k.pv_om == 21
        assert BessTech().eta_conv == pytest.approx(0.9025)
        with pytest.raises(ValueError):
            BessTech(eta_ch=1.2)
        with pytest.raises(ValueError):
            CostParams(lifetime=0)
