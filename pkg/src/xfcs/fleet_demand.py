"""Daily charging-demand profiles for an extreme-fast-charging station.

Pipeline per EV: sample departure time and SoC threshold/target, evolve the
state of charge over discretized daily-mileage bins, average the threshold
crossings into one arrival (time, SoC), queue the arrivals first-come
first-served at the station, and turn each accepted session into a
constant-power / constant-voltage per-minute energy vector.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MINUTES_PER_DAY = 1440


@dataclass(frozen=True)
class Normal:
    mean: float
    std: float

    def sample(self, rng: np.random.Generator, size=None):
        return rng.normal(self.mean, self.std, size)


def clock(hhmm: str) -> float:
    """'13:51' -> 831.0 minutes."""
    h, m = hhmm.split(":")
    return 60.0 * int(h) + int(m)


@dataclass(frozen=True)
class EvCategory:
    id: str
    fleet_share: float
    battery_capacity: float  # kWh
    consumption: float  # kWh/mile
    departure_weekday: Normal  # minutes after midnight
    departure_weekend: Normal

    def __post_init__(self):
        if not 0.0 <= self.fleet_share <= 1.0:
            raise ValueError(f"{self.id}: fleet share must lie in [0, 1]")
        if self.battery_capacity <= 0 or self.consumption <= 0:
            raise ValueError(f"{self.id}: capacity and consumption must be positive")


# shared weekend / non-commuter departures and the commuter weekday departures
DEPARTURE_GENERAL = Normal(clock("13:51"), clock("05:12"))
DEPARTURE_COMMUTER = Normal(clock("06:52"), clock("01:18"))


def default_categories() -> list[EvCategory]:
    return [
        EvCategory("EVC1", 0.61, 100.0, 0.35, DEPARTURE_COMMUTER, DEPARTURE_GENERAL),
        EvCategory("EVC2", 0.30, 100.0, 0.35, DEPARTURE_GENERAL, DEPARTURE_GENERAL),
        EvCategory("EVC3", 0.09, 160.0, 2.0, DEPARTURE_GENERAL, DEPARTURE_GENERAL),
    ]


@dataclass
class FleetConfig:
    n_evs: int = 100
    categories: list[EvCategory] = field(default_factory=default_categories)
    mileage_coeff: float = 0.0296  # 1/mile
    soc_thr_dist: Normal = Normal(30.0, 15.0)
    soc_target_dist: Normal = Normal(80.0, 10.0)
    soc_bounds: tuple[float, float] = (10.0, 90.0)
    rng_seed: int = 0
    bin_width: float = 1.0  # miles
    bin_max: float = 150.0  # last finite edge; one open bin follows

    def __post_init__(self):
        if self.n_evs < 0:
            raise ValueError("n_evs must be nonnegative")
        if self.mileage_coeff <= 0:
            raise ValueError("mileage coefficient must be positive")
        lo, hi = self.soc_bounds
        if not 0.0 <= lo < hi <= 100.0:
            raise ValueError("SoC bounds must satisfy 0 <= lower < upper <= 100")
        if self.categories and not math.isclose(sum(c.fleet_share for c in self.categories), 1.0, abs_tol=1e-9):
            raise ValueError("category fleet shares must sum to 1")

    @property
    def initial_soc(self) -> float:
        # fully charged overnight, i.e. the upper SoC bound
        return self.soc_bounds[1]

    def bin_edges(self) -> list[float]:
        n = int(round(self.bin_max / self.bin_width))
        return [k * self.bin_width for k in range(n + 1)] + [math.inf]


@dataclass(frozen=True)
class DrivingProfile:
    weekday_probs: tuple[float, ...]
    weekend_probs: tuple[float, ...]

    def __post_init__(self):
        for probs in (self.weekday_probs, self.weekend_probs):
            if len(probs) != 24 or any(not 0.0 <= p <= 1.0 for p in probs):
                raise ValueError("driving profile needs 24 hourly probabilities in [0, 1]")

    def probs(self, day_type: str) -> np.ndarray:
        return np.asarray(self.weekday_probs if day_type == "weekday" else self.weekend_probs, dtype=float)


@dataclass(frozen=True)
class MileageBin:
    index: int
    q_low: float
    q_high: float
    q_avg: float
    prob: float


@dataclass(frozen=True)
class StationConfig:
    n_ports: int = 3
    n_waiting: int = 5
    port_power: float = 350.0  # kW
    dt: float = 1.0 / 60.0  # h
    horizon: int = MINUTES_PER_DAY

    def __post_init__(self):
        if self.n_ports < 1 or self.n_waiting < 0:
            raise ValueError("need at least one port and a nonnegative number of waiting spots")
        if self.port_power <= 0 or self.dt <= 0:
            raise ValueError("port power and time step must be positive")

    @property
    def step_energy(self) -> float:
        return self.port_power * self.dt


@dataclass(frozen=True)
class CvParams:
    cutoff_soc: float = 80.0  # % where constant power gives way to the taper
    min_power_fraction: float = 0.05
    decay_time_constant: float = 4.0  # minutes

    def __post_init__(self):
        if not 0.0 < self.cutoff_soc <= 100.0:
            raise ValueError("cutoff SoC must lie in (0, 100]")
        if not 0.0 < self.min_power_fraction < 1.0:
            raise ValueError("minimum power fraction must lie in (0, 1)")
        if self.decay_time_constant <= 0:
            raise ValueError("decay time constant must be positive")


@dataclass
class ChargingSession:
    ev_index: int
    arrival_minute: int
    start_minute: int
    soc_arrival: float
    soc_target: float
    capacity: float
    energy_per_minute: np.ndarray

    @property
    def duration_minutes(self) -> int:
        return len(self.energy_per_minute)

    @property
    def energy(self) -> float:
        return float(self.energy_per_minute.sum())


@dataclass
class DemandProfile:
    day_type: str
    energy: np.ndarray  # kWh per minute
    rejected_count: int = 0
    sessions: list[ChargingSession] = field(default_factory=list, repr=False)

    @property
    def total(self) -> float:
        return float(self.energy.sum())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["minute", "kWh"])
            for m, e in enumerate(self.energy):
                w.writerow([m, repr(float(e))])


# ---------------------------------------------------------------------------
# mileage and state of charge


def build_mileage_bins(mileage_coeff: float, edges) -> list[MileageBin]:
    """Discretize the exponential daily-mileage density into bins.

    Each finite bin is represented by its midpoint; an open terminal bin
    ``[q, inf)`` uses the conditional mean ``q + 1/coeff``.
    """
    edges = [float(e) for e in edges]
    if len(edges) < 2 or edges[0] < 0 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("bin edges must be strictly increasing and start at a nonnegative value")
    w = mileage_coeff
    bins = []
    for a, (lo, hi) in enumerate(zip(edges, edges[1:])):
        prob = math.exp(-w * lo) - (0.0 if math.isinf(hi) else math.exp(-w * hi))
        q_avg = lo + 1.0 / w if math.isinf(hi) else 0.5 * (lo + hi)
        bins.append(MileageBin(a, lo, hi, q_avg, prob))
    return bins


def _minute_rates(hourly_probs, depart_minute: float, horizon: int = MINUTES_PER_DAY) -> np.ndarray:
    """Cumulative driving fraction for each minute offset 0..horizon after departure."""
    d = int(math.floor(depart_minute)) % MINUTES_PER_DAY
    minutes = (d + np.arange(horizon)) % MINUTES_PER_DAY
    per_minute = np.asarray(hourly_probs, dtype=float)[minutes // 60] / 60.0
    return np.concatenate(([0.0], np.cumsum(per_minute)))


@dataclass
class SocTrajectory:
    depart_minute: int
    soc: np.ndarray  # SoC at minute offsets 0..horizon, clamped below at the lower bound
    crossing_minute: float | None  # absolute (unwrapped) minute of the threshold crossing
    crossing_soc: float | None


def evolve_soc(
    capacity: float,
    consumption: float,
    q_avg: float,
    hourly_probs,
    depart_minute: float,
    soc_initial: float,
    soc_thr: float,
    soc_floor: float = 0.0,
) -> SocTrajectory:
    """Drain SoC by ``q_avg * p(hour) * consumption / capacity * 100`` per hour.

    The hourly decrement is spread evenly over its minutes and the trajectory
    runs for 24 h after departure (wrapping past midnight). The crossing is
    the first, linearly interpolated, instant with SoC <= ``soc_thr``.
    """
    d = int(math.floor(depart_minute)) % MINUTES_PER_DAY
    cum = _minute_rates(hourly_probs, d)
    drain = q_avg * consumption / capacity * 100.0
    raw = soc_initial - drain * cum
    crossing, soc_at = _crossing(cum, drain, soc_initial, soc_thr)
    return SocTrajectory(
        d,
        np.maximum(raw, soc_floor),
        None if crossing is None else d + crossing,
        soc_at,
    )


def _crossing(cum: np.ndarray, drain: float, soc_initial: float, soc_thr: float):
    if soc_initial <= soc_thr:
        return 0.0, soc_initial
    if drain <= 0.0:
        return None, None
    need = (soc_initial - soc_thr) / drain
    if need > cum[-1]:
        return None, None
    k = int(np.searchsorted(cum, need, side="left"))
    step = cum[k] - cum[k - 1]
    frac = (need - cum[k - 1]) / step if step > 0 else 0.0
    return (k - 1) + frac, soc_thr


def bin_crossings(ev: EvCategory, bins: list[MileageBin], hourly_probs, depart_minute, soc_initial, soc_thr):
    """Vectorized threshold crossings for every bin; ``None`` where SoC never reaches it."""
    d = int(math.floor(depart_minute)) % MINUTES_PER_DAY
    cum = _minute_rates(hourly_probs, d)
    q = np.array([b.q_avg for b in bins])
    drain = q * ev.consumption / ev.battery_capacity * 100.0
    if soc_initial <= soc_thr:
        return [(float(d), soc_initial)] * len(bins)
    with np.errstate(divide="ignore"):
        need = np.where(drain > 0, (soc_initial - soc_thr) / drain, np.inf)
    k = np.searchsorted(cum, need, side="left")
    out = []
    for kk, nd in zip(k, need):
        if not np.isfinite(nd) or nd > cum[-1]:
            out.append(None)
            continue
        step = cum[kk] - cum[kk - 1]
        frac = (nd - cum[kk - 1]) / step if step > 0 else 0.0
        out.append((d + (kk - 1) + frac, soc_thr))
    return out


def arrival_statistics(bins: list[MileageBin], crossings) -> tuple[float, float] | None:
    """Probability-weighted arrival minute and SoC over the bins that cross.

    Weights are renormalized over participating bins; ``None`` means the EV
    does not visit the station that day.
    """
    w_sum = t_sum = s_sum = 0.0
    for b, c in zip(bins, crossings):
        if c is None:
            continue
        w_sum += b.prob
        t_sum += b.prob * c[0]
        s_sum += b.prob * c[1]
    if w_sum <= 0.0:
        return None
    return t_sum / w_sum, s_sum / w_sum


# ---------------------------------------------------------------------------
# charging physics


def cpcv_session_energy(
    capacity: float,
    soc_start: float,
    soc_target: float,
    port_power: float,
    cv: CvParams,
    dt: float = 1.0 / 60.0,
) -> np.ndarray:
    """Per-step energy (kWh) of a constant-power / tapering charging session.

    Full port power until ``cv.cutoff_soc``; then power decays as
    ``P exp(-s / tau)`` down to a floor of ``min_power_fraction * P``, held
    until the target is met. Energies come from differencing the closed-form
    cumulative curve, so they telescope to the requested total.
    """
    if soc_start >= soc_target:
        raise ValueError("session needs soc_start < soc_target")
    total = (soc_target - soc_start) / 100.0 * capacity
    r = port_power * dt  # energy per step at full power
    tau = cv.decay_time_constant / (dt * 60.0)  # in steps
    f = cv.min_power_fraction
    e_cp = max(0.0, min(soc_target, cv.cutoff_soc) - soc_start) / 100.0 * capacity
    t_c = e_cp / r
    t_f = t_c + tau * math.log(1.0 / f)
    e_f = e_cp + r * tau * (1.0 - f)

    def cumulative(t: float) -> float:
        if t <= t_c:
            return r * t
        if t <= t_f:
            return e_cp + r * tau * (1.0 - math.exp(-(t - t_c) / tau))
        return e_f + f * r * (t - t_f)

    if total <= e_cp:
        t_end = total / r
    elif total <= e_f:
        t_end = t_c - tau * math.log(1.0 - (total - e_cp) / (r * tau))
    else:
        t_end = t_f + (total - e_f) / (f * r)
    n = max(1, math.ceil(t_end - 1e-9))
    grid = [cumulative(min(float(k), t_end)) for k in range(n)] + [total]
    return np.diff(np.asarray(grid))


# ---------------------------------------------------------------------------
# station queue


@dataclass(frozen=True)
class Arrival:
    minute: int
    ev_index: int
    duration: int


@dataclass
class QueueResult:
    starts: dict[int, int]  # ev_index -> start minute
    rejected: list[int]


def simulate_station_queue(arrivals, station: StationConfig) -> QueueResult:
    """First-come first-served service with ``n_ports`` servers and ``n_waiting`` spots.

    Arrivals are ordered by (minute, ev_index). A port freed at minute m serves
    a waiting EV at m; an arrival that finds every port busy and every waiting
    spot taken is turned away.
    """
    order = sorted(arrivals, key=lambda a: (a.minute, a.ev_index))
    port_free = [0] * station.n_ports  # minute at which each port frees up
    waiting: deque[Arrival] = deque()
    starts: dict[int, int] = {}
    rejected: list[int] = []

    def serve_waiting(until: float):
        while waiting:
            k = min(range(len(port_free)), key=port_free.__getitem__)
            if port_free[k] > until:
                return
            w = waiting.popleft()
            s = max(port_free[k], w.minute)
            starts[w.ev_index] = s
            port_free[k] = s + w.duration

    for a in order:
        serve_waiting(a.minute)
        k = min(range(len(port_free)), key=port_free.__getitem__)
        if not waiting and port_free[k] <= a.minute:
            starts[a.ev_index] = a.minute
            port_free[k] = a.minute + a.duration
        elif len(waiting) < station.n_waiting:
            waiting.append(a)
        else:
            rejected.append(a.ev_index)
    serve_waiting(math.inf)
    return QueueResult(starts, rejected)


def occupancy(sessions, horizon: int = MINUTES_PER_DAY, cyclic: bool = True):
    """Per-minute (charging, waiting) counts, folding times past the horizon when cyclic."""
    charging = np.zeros(horizon, dtype=int)
    waiting = np.zeros(horizon, dtype=int)

    def mark(arr, lo, hi):
        for m in range(lo, hi):
            if cyclic:
                arr[m % horizon] += 1
            elif 0 <= m < horizon:
                arr[m] += 1

    for s in sessions:
        mark(waiting, s.arrival_minute, s.start_minute)
        mark(charging, s.start_minute, s.start_minute + s.duration_minutes)
    return charging, waiting


def aggregate_demand(sessions, day_type: str, horizon: int = MINUTES_PER_DAY, rejected_count: int = 0) -> DemandProfile:
    """Per-minute sum of session energies on a cyclic day."""
    energy = np.zeros(horizon)
    for s in sessions:
        idx = (s.start_minute + np.arange(s.duration_minutes)) % horizon
        np.add.at(energy, idx, s.energy_per_minute)
    return DemandProfile(day_type, energy, rejected_count, list(sessions))


# ---------------------------------------------------------------------------
# end to end


@dataclass(frozen=True)
class EvRequest:
    ev_index: int
    arrival_minute: int
    soc_arrival: float
    soc_target: float
    capacity: float
    energy: np.ndarray = field(compare=False)


def category_counts(n_evs: int, categories) -> list[int]:
    """Largest-remainder split of ``n_evs`` by fleet share."""
    raw = [n_evs * c.fleet_share for c in categories]
    counts = [int(math.floor(x)) for x in raw]
    rest = n_evs - sum(counts)
    order = sorted(range(len(raw)), key=lambda k: (-(raw[k] - counts[k]), k))
    for k in order[:rest]:
        counts[k] += 1
    return counts


def _requests(fleet, station, profile, cv, day_type, rng) -> list[EvRequest]:
    lo, hi = fleet.soc_bounds
    bins = build_mileage_bins(fleet.mileage_coeff, fleet.bin_edges())
    probs = profile.probs(day_type)
    evs = [c for c, n in zip(fleet.categories, category_counts(fleet.n_evs, fleet.categories)) for _ in range(n)]
    if not evs:
        return []
    # draw every random quantity up front so the stream layout is fixed
    z_dep = rng.standard_normal(len(evs))
    z_thr = rng.standard_normal(len(evs))
    z_tgt = rng.standard_normal(len(evs))
    out = []
    for i, ev in enumerate(evs):
        dist = ev.departure_weekday if day_type == "weekday" else ev.departure_weekend
        depart = (dist.mean + dist.std * z_dep[i]) % MINUTES_PER_DAY
        thr = float(np.clip(fleet.soc_thr_dist.mean + fleet.soc_thr_dist.std * z_thr[i], lo, hi))
        target = float(np.clip(fleet.soc_target_dist.mean + fleet.soc_target_dist.std * z_tgt[i], lo, hi))
        crossings = bin_crossings(ev, bins, probs, depart, fleet.initial_soc, thr)
        stats = arrival_statistics(bins, crossings)
        if stats is None:
            continue
        t_arr, soc_arr = stats
        if target <= soc_arr + 1e-9:
            continue  # already above the SoC the driver would charge to
        energy = cpcv_session_energy(ev.battery_capacity, soc_arr, target, station.port_power, cv, station.dt)
        out.append(EvRequest(i, int(math.floor(t_arr)) % MINUTES_PER_DAY, soc_arr, target, ev.battery_capacity, energy))
    return out


def serve_cyclic_day(requests: list[EvRequest], station: StationConfig, max_days: int = 10):
    """Queue the same daily arrivals on consecutive days until the schedule repeats.

    Returns the sessions of the periodic day (start minutes relative to that
    day, possibly beyond 1440 for sessions that wait past midnight) and its
    rejection count.
    """
    h = station.horizon
    by_id = {r.ev_index: r for r in requests}
    stride = max(by_id, default=0) + 1  # ids on day k are k * stride + ev_index

    def day_view(res, k):
        starts = {i - k * stride: s - k * h for i, s in res.starts.items() if i // stride == k}
        rejected = sorted(i - k * stride for i in res.rejected if i // stride == k)
        return starts, rejected

    for days in range(2, max_days + 1):
        arrivals = [
            Arrival(r.arrival_minute + k * h, k * stride + r.ev_index, len(r.energy))
            for k in range(days)
            for r in requests
        ]
        res = simulate_station_queue(arrivals, station)
        last = day_view(res, days - 1)
        if last == day_view(res, days - 2):
            break
    starts, rejected = last
    sessions = [
        ChargingSession(
            i, by_id[i].arrival_minute, starts[i], by_id[i].soc_arrival, by_id[i].soc_target,
            by_id[i].capacity, by_id[i].energy,
        )
        for i in sorted(starts)
    ]
    return sessions, len(rejected)


def generate_day(fleet, station, profile, cv, day_type: str, rng: np.random.Generator) -> DemandProfile:
    requests = _requests(fleet, station, profile, cv, day_type, rng)
    sessions, n_rej = serve_cyclic_day(requests, station)
    return aggregate_demand(sessions, day_type, station.horizon, n_rej)


def generate_profiles(fleet: FleetConfig, station: StationConfig, profile: DrivingProfile, cv: CvParams):
    """Weekday and weekend demand profiles; deterministic for a given ``fleet.rng_seed``."""
    rng = np.random.default_rng(fleet.rng_seed)
    weekday = generate_day(fleet, station, profile, cv, "weekday", rng)
    weekend = generate_day(fleet, station, profile, cv, "weekend", rng)
    return weekday, weekend


def read_profile_csv(path, day_type: str) -> DemandProfile:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    energy = np.array([float(r["kWh"]) for r in rows])
    if energy.shape != (MINUTES_PER_DAY,) or np.any(energy < 0):
        raise ValueError(f"{path}: demand profile needs {MINUTES_PER_DAY} nonnegative rows")
    return DemandProfile(day_type, energy)
