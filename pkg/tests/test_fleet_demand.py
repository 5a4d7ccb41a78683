import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from xfcs import synthetic
from xfcs.fleet_demand import (
    Arrival,
    ChargingSession,
    CvParams,
    EvCategory,
    FleetConfig,
    MileageBin,
    Normal,
    StationConfig,
    aggregate_demand,
    arrival_statistics,
    bin_crossings,
    build_mileage_bins,
    category_counts,
    clock,
    cpcv_session_energy,
    evolve_soc,
    generate_day,
    generate_profiles,
    occupancy,
    simulate_station_queue,
)

DRIVING = synthetic.driving_profile()
DEPARTURE = Normal(clock("08:00"), 60.0)


def exp_density(q, w=0.0296):
    return w * math.exp(-w * q)


class TestMileageBins:
    def test_probability_matches_quadrature(self):
        (b,) = build_mileage_bins(0.0296, [10, 20])
        ref, _ = quad(exp_density, 10, 20)
        assert b.prob == pytest.approx(ref, abs=1e-12)
        assert b.prob == pytest.approx(0.1906, abs=1e-4)

    def test_whole_line_has_unit_mass(self):
        (b,) = build_mileage_bins(0.0296, [0, math.inf])
        assert b.prob == pytest.approx(1.0)
        assert b.q_avg == pytest.approx(1 / 0.0296)

    def test_open_bin_uses_conditional_mean(self):
        *_, last = build_mileage_bins(0.0296, [0, 150, math.inf])
        num, _ = quad(lambda q: q * exp_density(q), 150, math.inf)
        den, _ = quad(exp_density, 150, math.inf)
        assert last.q_avg == pytest.approx(num / den, rel=1e-8)

    def test_midpoint(self):
        (b,) = build_mileage_bins(0.0296, [10, 11])
        assert b.q_avg == 10.5

    @pytest.mark.parametrize("edges", [[5, 5], [10, 3], [-1, 2], [4]])
    def test_bad_edges(self, edges):
        with pytest.raises(ValueError):
            build_mileage_bins(0.0296, edges)

    @given(st.lists(st.floats(0.1, 30), min_size=1, max_size=30), st.floats(0.001, 0.2))
    def test_mass_at_most_one(self, widths, w):
        edges = np.concatenate(([0.0], np.cumsum(widths)))
        total = sum(b.prob for b in build_mileage_bins(w, edges))
        assert total <= 1.0 + 1e-12
        total_open = sum(b.prob for b in build_mileage_bins(w, list(edges) + [math.inf]))
        assert total_open == pytest.approx(1.0)


class TestSoc:
    def test_one_hour_decrement(self):
        probs = [0.0] * 24
        probs[0] = 0.1
        tr = evolve_soc(100.0, 0.35, 30.0, probs, 0, 80.0, 10.0)
        assert tr.soc[60] == pytest.approx(78.95)
        assert tr.soc[30] == pytest.approx(80.0 - 1.05 / 2)

    def test_no_driving_no_crossing(self):
        tr = evolve_soc(100.0, 0.35, 30.0, [0.0] * 24, 420, 90.0, 30.0)
        assert np.all(tr.soc == 90.0)
        assert tr.crossing_minute is None

    def test_threshold_at_start(self):
        tr = evolve_soc(100.0, 0.35, 30.0, DRIVING.weekday_probs, 400, 50.0, 50.0)
        assert tr.crossing_minute == 400
        assert tr.crossing_soc == 50.0

    def test_crossing_is_interpolated_and_clamp_applies(self):
        probs = [1.0] * 24
        tr = evolve_soc(100.0, 1.0, 60.0, probs, 0, 90.0, 30.0)
        # 60 %/h drain -> 1 %/min, threshold reached after 60 minutes
        assert tr.crossing_minute == pytest.approx(60.0)
        assert tr.soc.min() == 0.0

    def test_vectorised_crossings_match_scalar(self):
        ev = EvCategory("x", 1.0, 100.0, 0.35, DEPARTURE, DEPARTURE)
        bins = build_mileage_bins(0.0296, FleetConfig().bin_edges())
        fast = bin_crossings(ev, bins, DRIVING.weekday_probs, 500.4, 90.0, 35.0)
        for b, c in zip(bins[::7], fast[::7]):
            tr = evolve_soc(100.0, 0.35, b.q_avg, DRIVING.weekday_probs, 500.4, 90.0, 35.0)
            if tr.crossing_minute is None:
                assert c is None
            else:
                assert c[0] == pytest.approx(tr.crossing_minute)


class TestArrivalStatistics:
    def _bins(self, *probs):
        return [MileageBin(i, 0, 1, 0.5, p) for i, p in enumerate(probs)]

    def test_single_bin(self):
        assert arrival_statistics(self._bins(0.3), [(612.0, 30.0)]) == (612.0, 30.0)

    def test_weighted(self):
        t, _ = arrival_statistics(self._bins(0.2, 0.1), [(600.0, 30.0), (660.0, 30.0)])
        assert t == pytest.approx(620.0)
        t, _ = arrival_statistics(self._bins(0.1, 0.1), [(600.0, 30.0), (660.0, 30.0)])
        assert t == pytest.approx(630.0)

    def test_non_crossing_bins_excluded(self):
        t, _ = arrival_statistics(self._bins(0.2, 0.7), [(600.0, 30.0), None])
        assert t == 600.0

    def test_no_visit(self):
        assert arrival_statistics(self._bins(0.5), [None]) is None


class TestCpcv:
    cv = CvParams()

    def test_worked_session_total(self):
        e = cpcv_session_energy(160.0, 20.0, 85.6, 350.0, self.cv)
        assert e.sum() == pytest.approx(104.96, abs=1e-6)
        assert e.max() <= 350.0 / 60.0 + 1e-12

    def test_pure_constant_power(self):
        e = cpcv_session_energy(100.0, 20.0, 55.0, 350.0, self.cv)
        assert len(e) == math.ceil(35.0 / (350 / 60))
        assert np.allclose(e[:-1], 350 / 60)

    def test_start_above_target(self):
        with pytest.raises(ValueError):
            cpcv_session_energy(100.0, 60.0, 60.0, 350.0, self.cv)

    @given(
        st.floats(20, 200),
        st.floats(5, 85),
        st.floats(0.5, 60),
        st.floats(50, 400),
        st.floats(50, 100),
        st.floats(0.01, 0.5),
        st.floats(0.5, 20),
    )
    @settings(max_examples=300)
    def test_closure_and_shape(self, cap, s0, ds, power, cutoff, fmin, tau):
        cv = CvParams(cutoff, fmin, tau)
        target = min(s0 + ds, 100.0)
        e = cpcv_session_energy(cap, s0, target, power, cv)
        assert abs(e.sum() - (target - s0) / 100 * cap) <= 1e-6
        assert np.all(e >= -1e-12)
        assert np.all(e <= power / 60 + 1e-9)
        # once below full power the per-minute energy never rises, apart
        # from the final partial minute
        body = e[:-1]
        taper = np.flatnonzero(body < power / 60 - 1e-9)
        if len(taper):
            assert np.all(np.diff(body[taper[0]:]) <= 1e-9)


class TestQueue:
    st3 = StationConfig(n_ports=3, n_waiting=5)

    def test_four_simultaneous(self):
        res = simulate_station_queue([Arrival(0, i, 10) for i in range(4)], self.st3)
        assert sorted(res.starts.values()) == [0, 0, 0, 10]
        assert res.rejected == []

    def test_overflow(self):
        res = simulate_station_queue([Arrival(0, i, 10) for i in range(9)], self.st3)
        assert res.rejected == [8]

    def test_single_server(self):
        res = simulate_station_queue([Arrival(0, 0, 10), Arrival(1, 1, 10)], StationConfig(1, 1))
        assert res.starts == {0: 0, 1: 10}

    def test_fifo_order(self):
        arr = [Arrival(0, 0, 30), Arrival(5, 2, 5), Arrival(5, 1, 5)]
        res = simulate_station_queue(arr, StationConfig(1, 5))
        assert res.starts == {0: 0, 1: 30, 2: 35}


class TestAggregate:
    def _s(self, start, energy):
        return ChargingSession(0, start, start, 20, 80, 100, np.asarray(energy, float))

    def test_empty(self):
        assert aggregate_demand([], "weekday").total == 0.0

    def test_identity_and_additivity(self):
        a = self._s(10, [1.0, 2.0, 3.0])
        b = self._s(11, [4.0, 4.0])
        prof = aggregate_demand([a], "weekday")
        assert np.array_equal(prof.energy[10:13], [1, 2, 3])
        both = aggregate_demand([a, b], "weekday")
        assert both.energy[11] == 6.0 and both.energy[12] == 7.0
        assert both.total == pytest.approx(a.energy + b.energy)

    def test_wraps_past_midnight(self):
        prof = aggregate_demand([self._s(1439, [1.0, 2.0])], "weekend")
        assert prof.energy[1439] == 1.0 and prof.energy[0] == 2.0


class TestProfiles:
    def test_category_split(self):
        assert category_counts(100, FleetConfig().categories) == [61, 30, 9]
        assert sum(category_counts(7, FleetConfig().categories)) == 7

    def test_deterministic(self):
        st_ = StationConfig()
        a = generate_profiles(FleetConfig(rng_seed=3), st_, DRIVING, CvParams())
        b = generate_profiles(FleetConfig(rng_seed=3), st_, DRIVING, CvParams())
        for x, y in zip(a, b):
            assert x.energy.tobytes() == y.energy.tobytes()

    def test_empty_fleet(self):
        wd, we = generate_profiles(FleetConfig(n_evs=0), StationConfig(), DRIVING, CvParams())
        assert wd.total == 0.0 and we.total == 0.0

    def test_default_fleet_respects_port_capacity(self):
        wd, we = generate_profiles(FleetConfig(), StationConfig(), DRIVING, CvParams())
        cap = 3 * 350 / 60
        assert wd.energy.max() <= cap + 1e-9 and we.energy.max() <= cap + 1e-9
        assert wd.total > 0 and we.total > 0


def check_day(prof, station):
    charging, waiting = occupancy(prof.sessions, station.horizon)
    assert charging.max(initial=0) <= station.n_ports
    assert waiting.max(initial=0) <= station.n_waiting
    for s in prof.sessions:
        want = (s.soc_target - s.soc_arrival) / 100 * s.capacity
        assert abs(s.energy - want) <= 1e-6
        assert s.start_minute >= s.arrival_minute
    assert prof.energy.max(initial=0) <= station.n_ports * station.step_energy + 1e-9
    assert prof.total == pytest.approx(sum(s.energy for s in prof.sessions))


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n_evs=st.integers(0, 250),
    ports=st.integers(1, 5),
    waiting=st.integers(0, 8),
    day=st.sampled_from(["weekday", "weekend"]),
)
def test_random_days_are_physical(seed, n_evs, ports, waiting, day):
    station = StationConfig(n_ports=ports, n_waiting=waiting)
    fleet = FleetConfig(n_evs=n_evs, rng_seed=seed)
    prof = generate_day(fleet, station, DRIVING, CvParams(), day, np.random.default_rng(seed))
    check_day(prof, station)
    again = generate_day(fleet, station, DRIVING, CvParams(), day, np.random.default_rng(seed))
    assert prof.energy.tobytes() == again.energy.tobytes()
