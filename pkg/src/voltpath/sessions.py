"""Charging-session synthesis and per-session load profiles.

Sessions are generated month by month (minutes since month start) with no
cross-month spillover: a dwell that would cross the boundary is truncated
there and its energy renormalized, which reproduces the known jumps in
load at month transitions. Each (scenario, year, state, vclass, month)
work unit draws from its own seed-derived stream, so results are identical
for any thread count or call order.

Three strategies shape a session's load: immediate (full power from
arrival), minimum power (constant energy/dwell across the whole dwell),
and delayed (full power ending exactly at departure). ``min_delay`` and
``load_level`` are accepted as aliases for immediate and minimum power.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .ingest import VehicleClass

__all__ = [
    "Strategy",
    "StrategyMix",
    "ChargingSession",
    "RouteSpec",
    "TruncatedNormal",
    "ArrivalDwellComponent",
    "MobilityConfig",
    "FleetSpec",
    "SeededRng",
    "LoadSegment",
    "SampleCounters",
    "SimulationError",
    "BadConfig",
    "InfeasibleSession",
    "ZeroDwell",
    "NoFeasibleWindow",
    "SegmentOutOfRange",
    "sample_sessions",
    "profile_immediate",
    "profile_min_power",
    "profile_delayed",
    "profile",
    "enroute_window",
    "split_enroute",
    "aggregate_segments",
    "minutes_in_month",
    "hours_in_month",
    "MONTH_DAYS",
    "default_mobility_config",
]

MONTH_DAYS = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)  # fixed 365-day year
MINUTES_PER_DAY = 1440

CHARGER_KW_MIN = 3.7
CHARGER_KW_MAX = 500.0

FEASIBILITY_RTOL = 1e-9
MAX_REDRAWS = 10


def minutes_in_month(month: int) -> int:
    return MONTH_DAYS[month - 1] * MINUTES_PER_DAY


def hours_in_month(month: int) -> int:
    return MONTH_DAYS[month - 1] * 24


class SimulationError(Exception):
    pass


class BadConfig(SimulationError):
    pass


class InfeasibleSession(SimulationError):
    pass


class ZeroDwell(SimulationError):
    pass


class NoFeasibleWindow(SimulationError):
    pass


class SegmentOutOfRange(SimulationError):
    pass


class Strategy(enum.Enum):
    IMMEDIATE = "immediate"
    MIN_POWER = "min_power"
    DELAYED = "delayed"

    @classmethod
    def parse(cls, token: str) -> "Strategy":
        token = token.strip().lower()
        aliases = {"min_delay": cls.IMMEDIATE, "load_level": cls.MIN_POWER}
        if token in aliases:
            return aliases[token]
        try:
            return cls(token)
        except ValueError:
            raise BadConfig(f"unknown strategy {token!r}") from None


@dataclass(frozen=True)
class StrategyMix:
    """Probability weights over strategies; must sum to 1 within 1e-9."""

    weights: Mapping[Strategy, float]

    def __post_init__(self):
        if any(w < 0 or w > 1 for w in self.weights.values()):
            raise BadConfig(f"strategy weights outside [0, 1]: {self.weights}")
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9:
            raise BadConfig(f"strategy weights sum to {total!r}, not 1")

    def items(self) -> list[tuple[Strategy, float]]:
        # canonical order keeps sampling deterministic across construction order
        return sorted(self.weights.items(), key=lambda kv: kv[0].value)

    def weight(self, strategy: Strategy) -> float:
        return self.weights.get(strategy, 0.0)


@dataclass(frozen=True)
class ChargingSession:
    """One vehicle's dwell window with its energy need and plug rating.

    Times are minutes since month start. Feasibility (the dwell is long
    enough to deliver the energy at the plug rating) is enforced here, so
    any session that exists can be profiled.
    """

    vclass: VehicleClass
    state: str
    arrival_min: float
    departure_min: float
    energy_kwh: float
    power_kw: float
    strategy: Strategy

    def __post_init__(self):
        if self.departure_min <= self.arrival_min:
            raise ValueError(f"departure {self.departure_min} must exceed arrival {self.arrival_min}")
        if self.energy_kwh <= 0:
            raise ValueError(f"energy_kwh must be positive, got {self.energy_kwh}")
        if not (CHARGER_KW_MIN <= self.power_kw <= CHARGER_KW_MAX):
            raise ValueError(f"power_kw {self.power_kw} outside [{CHARGER_KW_MIN}, {CHARGER_KW_MAX}]")
        ceiling = self.power_kw * self.dwell_hours
        if self.energy_kwh > ceiling * (1.0 + FEASIBILITY_RTOL):
            raise InfeasibleSession(
                f"energy {self.energy_kwh} kWh exceeds {ceiling} kWh deliverable in dwell"
            )

    @property
    def dwell_minutes(self) -> float:
        return self.departure_min - self.arrival_min

    @property
    def dwell_hours(self) -> float:
        return self.dwell_minutes / 60.0


@dataclass(frozen=True)
class RouteSpec:
    """Depot departure/arrival times bracketing a route, with no-charge
    buffers right after leaving and right before returning."""

    depot_departure_min: float
    depot_arrival_min: float
    start_buffer_min: float = 0.0
    end_buffer_min: float = 0.0
    enroute_energy_share: float = 0.13

    def __post_init__(self):
        if self.start_buffer_min < 0 or self.end_buffer_min < 0:
            raise ValueError("buffers must be non-negative")
        if not (0.0 <= self.enroute_energy_share <= 1.0):
            raise ValueError(f"enroute_energy_share {self.enroute_energy_share} outside [0, 1]")
        span = self.depot_arrival_min - self.depot_departure_min
        if span <= self.start_buffer_min + self.end_buffer_min:
            raise ValueError("route span must exceed the two buffers combined")


class LoadSegment(NamedTuple):
    start_min: float
    end_min: float
    power_kw: float

    @property
    def energy_kwh(self) -> float:
        return self.power_kw * (self.end_min - self.start_min) / 60.0


@dataclass(frozen=True)
class TruncatedNormal:
    """Normal(mean, sd) truncated to [lo, hi], sampled by inverse CDF so a
    fixed number of uniforms is consumed per draw."""

    mean: float
    sd: float
    lo: float
    hi: float

    def __post_init__(self):
        if self.hi <= self.lo:
            raise BadConfig(f"truncation bounds [{self.lo}, {self.hi}] are empty")
        if self.sd < 0:
            raise BadConfig("sd must be non-negative")

    def ppf(self, u: np.ndarray) -> np.ndarray:
        if self.sd == 0:
            return np.full_like(np.asarray(u, dtype=float), min(max(self.mean, self.lo), self.hi))
        a = ndtr((self.lo - self.mean) / self.sd)
        b = ndtr((self.hi - self.mean) / self.sd)
        x = self.mean + self.sd * ndtri(a + np.asarray(u) * (b - a))
        return np.clip(x, self.lo, self.hi)


@dataclass(frozen=True)
class ArrivalDwellComponent:
    """One weighted arrival/dwell pattern; arrivals are minutes of local day."""

    weight: float
    arrival: TruncatedNormal
    dwell: TruncatedNormal


@dataclass(frozen=True)
class FleetSpec:
    state: str
    vclass: VehicleClass
    count: int


@dataclass(frozen=True)
class SampleCounters:
    """Mutable tally of clipped infeasible draws (bounded-retry fallback)."""

    clipped: list = field(default_factory=lambda: [0])

    def note_clipped(self, n: int) -> None:
        self.clipped[0] += n

    @property
    def clipped_total(self) -> int:
        return self.clipped[0]


@dataclass(frozen=True)
class MobilityConfig:
    """All paper-gap mobility assumptions, in one configurable place.

    The prior work's full weather-informed dwell model is represented only
    through these distributions; fixtures pin them per experiment.
    """

    dwell: Mapping[VehicleClass, tuple[ArrivalDwellComponent, ...]]
    charger_mix: Mapping[VehicleClass, tuple[tuple[float, float], ...]]  # (kW, weight)
    energy_kwh: Mapping[VehicleClass, TruncatedNormal]
    strategy_mix_anchors: Mapping[int, StrategyMix]
    strategy_mix_overrides: Mapping[tuple[str, int], StrategyMix] = field(default_factory=dict)
    depot_share: float = 0.87
    enroute_start_buffer_min: float = 60.0
    enroute_end_buffer_min: float = 60.0
    sessions_per_month: Mapping[VehicleClass, int] = field(default_factory=dict)
    monthly_ldv_factors: tuple[float, ...] | None = None

    def __post_init__(self):
        if not (0.0 <= self.depot_share <= 1.0):
            raise BadConfig(f"depot_share {self.depot_share} outside [0, 1]")
        for vclass, components in self.dwell.items():
            total = sum(c.weight for c in components)
            if abs(total - 1.0) > 1e-9:
                raise BadConfig(f"dwell component weights for {vclass.value} sum to {total!r}")
        for vclass, levels in self.charger_mix.items():
            total = sum(w for _, w in levels)
            if abs(total - 1.0) > 1e-9:
                raise BadConfig(f"charger mix for {vclass.value} sums to {total!r}")
            for kw, _ in levels:
                if not (CHARGER_KW_MIN <= kw <= CHARGER_KW_MAX):
                    raise BadConfig(f"charger level {kw} kW outside [{CHARGER_KW_MIN}, {CHARGER_KW_MAX}]")
        if self.monthly_ldv_factors is not None and len(self.monthly_ldv_factors) != 12:
            raise BadConfig("monthly_ldv_factors must have 12 entries")
        if not self.strategy_mix_anchors:
            raise BadConfig("at least one strategy mix anchor year required")

    @property
    def enroute_energy_share(self) -> float:
        return 1.0 - self.depot_share

    def strategy_mix_for(self, scenario: str, year: int) -> StrategyMix:
        """Mix for a scenario-year: explicit override, else linear
        interpolation between anchor years, clamped outside the anchors."""
        override = self.strategy_mix_overrides.get((scenario, year))
        if override is not None:
            return override
        anchors = sorted(self.strategy_mix_anchors.items())
        if year <= anchors[0][0]:
            return anchors[0][1]
        if year >= anchors[-1][0]:
            return anchors[-1][1]
        for (y0, m0), (y1, m1) in zip(anchors, anchors[1:]):
            if y0 <= year <= y1:
                t = (year - y0) / (y1 - y0)
                weights = {
                    s: (1 - t) * m0.weight(s) + t * m1.weight(s)
                    for s in Strategy
                }
                return StrategyMix({s: w for s, w in weights.items() if w > 0})
        raise AssertionError("unreachable")


def default_mobility_config() -> MobilityConfig:
    """Defaults: LDV evening-weighted arrivals with a smaller morning
    component, MHDV depot overnight dwells, charger classes spanning
    3.7-500 kW, and the 2035/2050 strategy-mix anchors with linear
    interpolation in between (an assumption for unquoted years)."""
    ldv = (
        ArrivalDwellComponent(
            weight=0.7,
            arrival=TruncatedNormal(mean=21.5 * 60, sd=100.0, lo=16 * 60, hi=MINUTES_PER_DAY - 1),
            dwell=TruncatedNormal(mean=10 * 60, sd=120.0, lo=120, hi=14 * 60),
        ),
        ArrivalDwellComponent(
            weight=0.3,
            arrival=TruncatedNormal(mean=8 * 60, sd=75.0, lo=5 * 60, hi=12 * 60),
            dwell=TruncatedNormal(mean=7 * 60, sd=90.0, lo=60, hi=10 * 60),
        ),
    )
    depot = (
        ArrivalDwellComponent(
            weight=1.0,
            arrival=TruncatedNormal(mean=19 * 60, sd=60.0, lo=17 * 60, hi=23 * 60),
            dwell=TruncatedNormal(mean=11 * 60, sd=90.0, lo=6 * 60, hi=14 * 60),
        ),
    )
    return MobilityConfig(
        dwell={VehicleClass.LDV: ldv, VehicleClass.MDV: depot, VehicleClass.HDV: depot},
        charger_mix={
            VehicleClass.LDV: ((3.7, 0.15), (7.4, 0.45), (11.0, 0.25), (22.0, 0.1), (50.0, 0.05)),
            VehicleClass.MDV: ((22.0, 0.2), (50.0, 0.5), (150.0, 0.3)),
            VehicleClass.HDV: ((50.0, 0.2), (150.0, 0.4), (350.0, 0.3), (500.0, 0.1)),
        },
        energy_kwh={
            VehicleClass.LDV: TruncatedNormal(mean=15.0, sd=6.0, lo=2.0, hi=60.0),
            VehicleClass.MDV: TruncatedNormal(mean=90.0, sd=30.0, lo=10.0, hi=250.0),
            VehicleClass.HDV: TruncatedNormal(mean=280.0, sd=80.0, lo=30.0, hi=800.0),
        },
        strategy_mix_anchors={
            2035: StrategyMix({Strategy.IMMEDIATE: 0.8, Strategy.MIN_POWER: 0.2}),
            2050: StrategyMix({Strategy.IMMEDIATE: 0.3, Strategy.MIN_POWER: 0.7}),
        },
        sessions_per_month={VehicleClass.LDV: 400, VehicleClass.MDV: 150, VehicleClass.HDV: 150},
    )


@dataclass(frozen=True)
class SeededRng:
    """Root seed plus derivation of independent per-unit streams.

    Streams are derived by hashing the path, so the draw sequence for a
    unit depends only on (seed, path), never on execution order.
    """

    seed: int

    def stream(self, *path) -> np.random.Generator:
        digest = hashlib.sha256("\x1f".join(_canon(p) for p in path).encode("utf-8")).digest()
        words = [int.from_bytes(digest[i : i + 8], "little") for i in range(0, 32, 8)]
        return np.random.default_rng(np.random.SeedSequence([self.seed & (2**64 - 1), *words]))


def _canon(part) -> str:
    if isinstance(part, enum.Enum):
        return str(part.value)
    return str(part)


def _weighted_choice(rng: np.random.Generator, weights: Sequence[float], n: int) -> np.ndarray:
    cdf = np.cumsum(np.asarray(weights, dtype=float))
    cdf /= cdf[-1]
    return np.searchsorted(cdf, rng.random(n), side="right")


def sample_sessions(
    cfg: MobilityConfig,
    spec: FleetSpec,
    month: int,
    mix: StrategyMix,
    rng: np.random.Generator,
    utc_shift_min: float = 0.0,
    counters: SampleCounters | None = None,
) -> list[ChargingSession]:
    """Draw ``spec.count`` sessions for one (state, vclass, month) unit.

    Arrivals and dwells are sampled in local time, shifted to UTC by
    ``utc_shift_min`` and wrapped modulo the month; dwells crossing the
    month end are truncated with energy scaled by the kept fraction.
    Draws whose energy exceeds power x dwell are re-drawn up to ten times,
    then the energy is clipped to the deliverable ceiling and tallied.
    """
    if spec.count < 0:
        raise ValueError("session count must be >= 0")
    if not spec.vclass.is_road:
        raise BadConfig(f"sessions are only simulated for road classes, got {spec.vclass.value}")
    n = spec.count
    if n == 0:
        return []
    components = cfg.dwell.get(spec.vclass)
    if not components:
        raise BadConfig(f"no dwell components configured for {spec.vclass.value}")
    charger_levels = cfg.charger_mix.get(spec.vclass)
    if not charger_levels:
        raise BadConfig(f"no charger mix configured for {spec.vclass.value}")
    energy_dist = cfg.energy_kwh.get(spec.vclass)
    if energy_dist is None:
        raise BadConfig(f"no energy distribution configured for {spec.vclass.value}")

    month_min = float(minutes_in_month(month))
    days = MONTH_DAYS[month - 1]

    # draw order is fixed; every stream below consumes a deterministic count
    day = rng.integers(0, days, size=n)
    comp_idx = _weighted_choice(rng, [c.weight for c in components], n)
    u_arrival = rng.random(n)
    u_dwell = rng.random(n)

    arrival_local = np.empty(n)
    dwell = np.empty(n)
    for i, comp in enumerate(components):
        mask = comp_idx == i
        if mask.any():
            arrival_local[mask] = comp.arrival.ppf(u_arrival[mask])
            dwell[mask] = comp.dwell.ppf(u_dwell[mask])

    kw_levels = np.array([kw for kw, _ in charger_levels])
    power = kw_levels[_weighted_choice(rng, [w for _, w in charger_levels], n)]
    energy = energy_dist.ppf(rng.random(n))

    mix_items = mix.items()
    strategies = [s for s, _ in mix_items]
    strategy_idx = _weighted_choice(rng, [w for _, w in mix_items], n)

    # bounded redraws for infeasible (energy, power) pairs, then clip
    for _ in range(MAX_REDRAWS):
        bad = energy > power * (dwell / 60.0)
        if not bad.any():
            break
        k = int(bad.sum())
        power[bad] = kw_levels[_weighted_choice(rng, [w for _, w in charger_levels], k)]
        energy[bad] = energy_dist.ppf(rng.random(k))
    bad = energy > power * (dwell / 60.0)
    if bad.any():
        energy[bad] = power[bad] * (dwell[bad] / 60.0)
        if counters is not None:
            counters.note_clipped(int(bad.sum()))

    arrival = np.mod(day * MINUTES_PER_DAY + arrival_local + utc_shift_min, month_min)
    departure = arrival + dwell
    over = departure > month_min
    if over.any():
        kept = (month_min - arrival[over]) / dwell[over]
        energy[over] = energy[over] * kept
        departure[over] = month_min

    sessions = []
    for i in range(n):
        if energy[i] <= 0.0:  # fully truncated sliver; drop
            continue
        sessions.append(
            ChargingSession(
                vclass=spec.vclass,
                state=spec.state,
                arrival_min=float(arrival[i]),
                departure_min=float(departure[i]),
                energy_kwh=float(energy[i]),
                power_kw=float(power[i]),
                strategy=strategies[strategy_idx[i]],
            )
        )
    return sessions


def profile_immediate(session: ChargingSession) -> list[LoadSegment]:
    """Full plug power from arrival until the energy is delivered."""
    if session.strategy is not Strategy.IMMEDIATE:
        raise ValueError(f"session strategy is {session.strategy.value}, not immediate")
    duration_min = session.energy_kwh / session.power_kw * 60.0
    if duration_min > session.dwell_minutes * (1.0 + FEASIBILITY_RTOL):
        raise InfeasibleSession("charging duration exceeds dwell")
    end = min(session.arrival_min + duration_min, session.departure_min)
    return [LoadSegment(session.arrival_min, end, session.power_kw)]


def profile_min_power(session: ChargingSession) -> list[LoadSegment]:
    """Constant energy/dwell power across the whole dwell window."""
    if session.strategy is not Strategy.MIN_POWER:
        raise ValueError(f"session strategy is {session.strategy.value}, not min_power")
    if session.dwell_minutes <= 0:
        raise ZeroDwell("dwell has zero length")
    power = session.energy_kwh / session.dwell_hours
    return [LoadSegment(session.arrival_min, session.departure_min, power)]


def profile_delayed(session: ChargingSession) -> list[LoadSegment]:
    """Full plug power ending exactly at departure."""
    if session.strategy is not Strategy.DELAYED:
        raise ValueError(f"session strategy is {session.strategy.value}, not delayed")
    duration_min = session.energy_kwh / session.power_kw * 60.0
    if duration_min > session.dwell_minutes * (1.0 + FEASIBILITY_RTOL):
        raise InfeasibleSession("charging duration exceeds dwell")
    start = max(session.departure_min - duration_min, session.arrival_min)
    return [LoadSegment(start, session.departure_min, session.power_kw)]


_PROFILERS = {
    Strategy.IMMEDIATE: profile_immediate,
    Strategy.MIN_POWER: profile_min_power,
    Strategy.DELAYED: profile_delayed,
}


def profile(session: ChargingSession) -> list[LoadSegment]:
    return _PROFILERS[session.strategy](session)


def enroute_window(route: RouteSpec, rng: np.random.Generator) -> tuple[int, int]:
    """Uniform draw over ordered integer-minute pairs inside the buffered
    route: start >= departure + start buffer, end <= arrival - end buffer."""
    lo = math.ceil(route.depot_departure_min + route.start_buffer_min)
    hi = math.floor(route.depot_arrival_min - route.end_buffer_min)
    if hi - lo < 1:
        raise NoFeasibleWindow(f"no integer-minute window inside [{lo}, {hi}]")
    while True:
        a, b = rng.integers(lo, hi + 1, size=2)
        if a != b:
            return (int(min(a, b)), int(max(a, b)))


def split_enroute(
    session: ChargingSession, route: RouteSpec, rng: np.random.Generator
) -> tuple[ChargingSession | None, ChargingSession | None]:
    """Split one MHDV session into a depot part and an en-route part.

    Energy is split (1 - share, share) with the depot part computed as the
    exact remainder, so the children always sum back to the parent. The
    en-route window is redrawn until it can deliver its energy at the
    session's plug rating; persistent failure raises NoFeasibleWindow.
    """
    if session.vclass not in (VehicleClass.MDV, VehicleClass.HDV):
        raise ValueError(f"en-route split applies to MDV/HDV only, got {session.vclass.value}")
    share = route.enroute_energy_share
    if share == 0.0:
        return (session, None)
    enroute_energy = session.energy_kwh * share
    depot_energy = session.energy_kwh - enroute_energy

    window = None
    for _ in range(MAX_REDRAWS):
        start, end = enroute_window(route, rng)
        if enroute_energy <= session.power_kw * ((end - start) / 60.0) * (1.0 + FEASIBILITY_RTOL):
            window = (start, end)
            break
    if window is None:
        raise NoFeasibleWindow("no sampled window can deliver the en-route energy")

    enroute_session = ChargingSession(
        vclass=session.vclass,
        state=session.state,
        arrival_min=float(window[0]),
        departure_min=float(window[1]),
        energy_kwh=enroute_energy,
        power_kw=session.power_kw,
        strategy=session.strategy,
    )
    if depot_energy <= 0.0:
        return (None, enroute_session)
    return (replace(session, energy_kwh=depot_energy), enroute_session)


def aggregate_segments(
    segments: Iterable[LoadSegment], month: int, resolution_hours: float = 1.0
) -> np.ndarray:
    """Bin segments into per-hour average kW for one month.

    Each segment's energy goes to bins proportionally to overlap, so the
    bin sum times the resolution reproduces the total energy exactly (up
    to float rounding).
    """
    total_min = float(minutes_in_month(month))
    res_min = resolution_hours * 60.0
    n_bins = int(round(total_min / res_min))
    if abs(n_bins * res_min - total_min) > 1e-9:
        raise ValueError(f"resolution {resolution_hours} h does not divide the month evenly")
    energy = np.zeros(n_bins)

    seg_list = list(segments)
    if not seg_list:
        return energy
    starts = np.array([s.start_min for s in seg_list], dtype=float)
    ends = np.array([s.end_min for s in seg_list], dtype=float)
    powers = np.array([s.power_kw for s in seg_list], dtype=float)

    if (ends < starts).any():
        raise SegmentOutOfRange("segment with end before start")
    if (starts < -1e-9).any() or (ends > total_min + 1e-9).any():
        raise SegmentOutOfRange("segment outside the month")
    starts = np.clip(starts, 0.0, total_min)
    ends = np.clip(ends, 0.0, total_min)

    keep = ends > starts
    starts, ends, powers = starts[keep], ends[keep], powers[keep]
    if starts.size == 0:
        return energy

    idx_s = np.minimum((starts // res_min).astype(int), n_bins - 1)
    idx_e = np.maximum(np.ceil(ends / res_min).astype(int) - 1, idx_s)

    same = idx_s == idx_e
    np.add.at(energy, idx_s[same], powers[same] * (ends[same] - starts[same]) / 60.0)

    multi = ~same
    if multi.any():
        np.add.at(
            energy, idx_s[multi], powers[multi] * ((idx_s[multi] + 1) * res_min - starts[multi]) / 60.0
        )
        np.add.at(energy, idx_e[multi], powers[multi] * (ends[multi] - idx_e[multi] * res_min) / 60.0)
        diff = np.zeros(n_bins + 1)
        np.add.at(diff, idx_s[multi] + 1, powers[multi])
        np.add.at(diff, idx_e[multi], -powers[multi])
        energy += np.cumsum(diff[:-1]) * (res_min / 60.0)

    # the exact per-bin sum is non-negative; drop cumsum cancellation noise
    return np.maximum(energy, 0.0) / resolution_hours
