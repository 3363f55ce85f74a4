"""Annual state energy -> hourly UTC load series, BA allocation, and load
statistics (peak, valley, spread, seasonal profiles).

The year is a fixed 8760-hour calendar (Feb 29 dropped in leap years).
EJ -> MWh conversion lives here and only here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .ingest import BAAllocationMap, UnknownState
from .sessions import MONTH_DAYS, hours_in_month

__all__ = [
    "EJ_TO_MWH",
    "HOURS_PER_YEAR",
    "SEASON_MONTHS",
    "HourlyLoadSeries",
    "SeasonalProfile",
    "LoadStats",
    "DownscaleError",
    "MissingMonth",
    "ZeroShape",
    "UnmappedState",
    "build_state_series",
    "flat_series",
    "allocate_to_bas",
    "seasonal_average",
    "load_stats",
    "seasonal_peak_gap",
    "daily_peak_hours",
    "month_of_hour",
]

EJ_TO_MWH = 1e18 / 3.6e9  # = 277,777,777.78 MWh per EJ
HOURS_PER_YEAR = 8760

# meteorological seasons on UTC timestamps
SEASON_MONTHS = {
    "winter": (12, 1, 2),
    "spring": (3, 4, 5),
    "summer": (6, 7, 8),
    "autumn": (9, 10, 11),
}
SEASONS = ("winter", "spring", "summer", "autumn")

MONTH_START_HOUR = np.concatenate(([0], np.cumsum([d * 24 for d in MONTH_DAYS])))


def month_of_hour() -> np.ndarray:
    """Month (1-12) for each of the 8760 hour indices."""
    months = np.empty(HOURS_PER_YEAR, dtype=int)
    for m in range(12):
        months[MONTH_START_HOUR[m] : MONTH_START_HOUR[m + 1]] = m + 1
    return months


_MONTH_OF_HOUR = month_of_hour()
_HOUR_OF_DAY = np.arange(HOURS_PER_YEAR) % 24


class DownscaleError(Exception):
    pass


class MissingMonth(DownscaleError):
    pass


class ZeroShape(DownscaleError):
    pass


class UnmappedState(DownscaleError):
    pass


@dataclass(frozen=True)
class HourlyLoadSeries:
    """8760-point MW series for one state or balancing authority."""

    entity: str
    scenario: str
    year: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (HOURS_PER_YEAR,):
            raise ValueError(f"series must have exactly {HOURS_PER_YEAR} values, got {values.shape}")
        if (values < 0).any():
            raise ValueError("load values must be non-negative")
        object.__setattr__(self, "values", values)

    def annual_mwh(self) -> float:
        return float(self.values.sum())  # 1-hour bins: MW sum == MWh

    def with_values(self, values: np.ndarray) -> "HourlyLoadSeries":
        return HourlyLoadSeries(self.entity, self.scenario, self.year, values)


@dataclass(frozen=True)
class SeasonalProfile:
    season: str
    values: np.ndarray  # 24 UTC hourly means, MW

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (24,):
            raise ValueError("seasonal profile must have 24 values")
        if (values < 0).any():
            raise ValueError("seasonal profile values must be non-negative")
        object.__setattr__(self, "values", values)

    @property
    def peak(self) -> float:
        return float(self.values.max())


@dataclass(frozen=True)
class LoadStats:
    peak_mw: float
    valley_mw: float
    spread_mw: float
    peak_hour_utc: int


def build_state_series(
    annual_energy_ej: float,
    monthly_profiles: Mapping[int, np.ndarray],
    monthly_factors: Sequence[float] | None = None,
    *,
    entity: str,
    scenario: str,
    year: int,
) -> HourlyLoadSeries:
    """Concatenate 12 monthly shapes and rescale to the annual energy.

    Shapes are relative; only their proportions matter. Optional monthly
    factors reweight months against each other while the final rescale
    keeps the annual total exact.
    """
    if annual_energy_ej < 0:
        raise ValueError("annual energy must be non-negative")
    blocks = []
    for m in range(1, 13):
        if m not in monthly_profiles:
            raise MissingMonth(f"no profile for month {m}")
        block = np.asarray(monthly_profiles[m], dtype=float)
        if block.shape != (hours_in_month(m),):
            raise MissingMonth(
                f"month {m} profile has {block.shape} values, expected {hours_in_month(m)}"
            )
        if monthly_factors is not None:
            block = block * monthly_factors[m - 1]
        blocks.append(block)
    shape = np.concatenate(blocks)
    if (shape < 0).any():
        raise ValueError("monthly profiles must be non-negative")

    annual_mwh = annual_energy_ej * EJ_TO_MWH
    if annual_mwh == 0.0:
        return HourlyLoadSeries(entity, scenario, year, np.zeros(HOURS_PER_YEAR))
    total = shape.sum()
    if total <= 0.0:
        raise ZeroShape("cannot scale a zero shape to positive annual energy")
    return HourlyLoadSeries(entity, scenario, year, shape * (annual_mwh / total))


def flat_series(annual_energy_ej: float, *, entity: str, scenario: str, year: int) -> HourlyLoadSeries:
    """Constant series carrying the annual energy (rail/aviation/ship)."""
    if annual_energy_ej < 0:
        raise ValueError("annual energy must be non-negative")
    level = annual_energy_ej * EJ_TO_MWH / HOURS_PER_YEAR
    return HourlyLoadSeries(entity, scenario, year, np.full(HOURS_PER_YEAR, level))


def allocate_to_bas(
    series: HourlyLoadSeries, ba_map: BAAllocationMap, group: str
) -> dict[str, HourlyLoadSeries]:
    """Split one state series across its BAs by the group's weights."""
    try:
        shares = ba_map.weights_for(series.entity, group)
    except UnknownState as exc:
        raise UnmappedState(str(exc)) from None
    return {
        ba_id: HourlyLoadSeries(ba_id, series.scenario, series.year, series.values * weight)
        for ba_id, weight in shares
    }


def seasonal_average(series: HourlyLoadSeries) -> list[SeasonalProfile]:
    """Mean load per UTC hour-of-day within each meteorological season."""
    profiles = []
    for season in SEASONS:
        in_season = np.isin(_MONTH_OF_HOUR, SEASON_MONTHS[season])
        values = np.empty(24)
        for hour in range(24):
            mask = in_season & (_HOUR_OF_DAY == hour)
            values[hour] = series.values[mask].mean()
        profiles.append(SeasonalProfile(season=season, values=values))
    return profiles


def load_stats(series: HourlyLoadSeries) -> LoadStats:
    peak = float(series.values.max())
    valley = float(series.values.min())
    return LoadStats(
        peak_mw=peak,
        valley_mw=valley,
        spread_mw=peak - valley,
        peak_hour_utc=int(series.values.argmax()),
    )


def seasonal_peak_gap(profiles: Sequence[SeasonalProfile]) -> float:
    """Summer peak minus winter peak of the seasonal mean profiles."""
    by_season = {p.season: p for p in profiles}
    missing = [s for s in ("summer", "winter") if s not in by_season]
    if missing:
        raise ValueError(f"missing seasonal profiles: {missing}")
    return by_season["summer"].peak - by_season["winter"].peak


def daily_peak_hours(series: HourlyLoadSeries, k: int = 2) -> list[int]:
    """UTC hours of the k tallest local maxima of the mean diurnal profile.

    The diurnal profile is circular, so hour 0 neighbors hour 23.
    """
    diurnal = np.array([series.values[_HOUR_OF_DAY == h].mean() for h in range(24)])
    peaks = [
        h
        for h in range(24)
        if diurnal[h] >= diurnal[(h - 1) % 24] and diurnal[h] > diurnal[(h + 1) % 24]
    ]
    if not peaks:  # constant profile
        return []
    peaks.sort(key=lambda h: -diurnal[h])
    return sorted(peaks[:k])
