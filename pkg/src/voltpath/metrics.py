"""Scalar metrics over a ScenarioTable: electrification rates, fuel mix,
per-capita fuel mix, and cross-scenario deltas.

All fractions are reals in [0, 1]; rendering as percentages is a CLI
concern. Computations are pure and reentrant over immutable tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .ingest import Fuel, Powertrain, ScenarioTable, VehicleClass, ROAD_CLASSES

__all__ = [
    "RegionFilter",
    "MetricsReport",
    "MetricsError",
    "EmptyDenominator",
    "UnsupportedClass",
    "MissingPopulation",
    "ZeroBaseline",
    "ev_energy_fraction",
    "ev_fleet_fraction",
    "fuel_mix",
    "fuel_mix_per_capita",
    "scenario_delta",
    "build_report",
]

PER_CAPITA_BASIS = 10_000_000  # persons; per-capita values are EJ per 10 million


class MetricsError(Exception):
    pass


class EmptyDenominator(MetricsError):
    pass


class UnsupportedClass(MetricsError):
    pass


class MissingPopulation(MetricsError):
    pass


class ZeroBaseline(MetricsError):
    pass


@dataclass(frozen=True)
class RegionFilter:
    """States to include (empty = all) and vehicle classes to aggregate."""

    states: frozenset[str] = frozenset()
    vclasses: frozenset[VehicleClass] = frozenset(VehicleClass)
    name: str = "all"

    def __post_init__(self):
        if not self.vclasses:
            raise ValueError("RegionFilter.vclasses must be non-empty")

    def admits_state(self, state: str) -> bool:
        return not self.states or state in self.states


@dataclass(frozen=True)
class MetricsReport:
    scenario: str
    year: int
    region: RegionFilter
    ev_energy_fraction: float | None
    ev_fleet_fraction: float | None
    fuel_mix: Mapping[Fuel, float] = field(default_factory=dict)
    fuel_mix_per_capita: Mapping[str, Mapping[Fuel, float]] = field(default_factory=dict)


def _energy_rows(table: ScenarioTable, scenario: str, year: int, region: RegionFilter):
    for r in table.energy:
        if (
            r.scenario == scenario
            and r.year == year
            and region.admits_state(r.state)
            and r.vclass in region.vclasses
        ):
            yield r


def ev_energy_fraction(table: ScenarioTable, scenario: str, year: int, region: RegionFilter) -> float:
    """Electric energy / total energy over the filtered records.

    Sums use fsum, so the result is exactly permutation-invariant.
    """
    rows = list(_energy_rows(table, scenario, year, region))
    total = math.fsum(r.energy_ej for r in rows)
    if total == 0.0:
        raise EmptyDenominator(f"no energy for {scenario}/{year} in region {region.name!r}")
    electric = math.fsum(r.energy_ej for r in rows if r.fuel is Fuel.ELECTRICITY)
    return electric / total


def ev_fleet_fraction(table: ScenarioTable, scenario: str, year: int, region: RegionFilter) -> float:
    """EV count / total count over the filtered fleet records.

    Only road classes carry fleet records; a region naming Rail, Aviation,
    or Ship is rejected.
    """
    bad = [v for v in region.vclasses if not v.is_road]
    if bad:
        raise UnsupportedClass(f"fleet fraction undefined for {[v.value for v in bad]}")
    rows = [
        r
        for r in table.fleet
        if r.scenario == scenario
        and r.year == year
        and region.admits_state(r.state)
        and r.vclass in region.vclasses
    ]
    total = math.fsum(r.count for r in rows)
    if total == 0.0:
        raise EmptyDenominator(f"no fleet for {scenario}/{year} in region {region.name!r}")
    ev = math.fsum(r.count for r in rows if r.powertrain is Powertrain.EV)
    return ev / total


def fuel_mix(table: ScenarioTable, scenario: str, year: int, region: RegionFilter) -> dict[Fuel, float]:
    """Per-fuel energy sums in EJ; absent fuels map to 0."""
    rows = list(_energy_rows(table, scenario, year, region))
    return {fuel: math.fsum(r.energy_ej for r in rows if r.fuel is fuel) for fuel in Fuel}


def fuel_mix_per_capita(
    table: ScenarioTable, scenario: str, year: int, state: str, region: RegionFilter | None = None
) -> dict[Fuel, float]:
    """Fuel mix of one state scaled to EJ per 10 million persons."""
    persons = table.population_of(state, year)
    if persons is None:
        raise MissingPopulation(f"no population record for {state}/{year}")
    vclasses = region.vclasses if region is not None else frozenset(VehicleClass)
    single = RegionFilter(states=frozenset({state}), vclasses=vclasses, name=state)
    mix = fuel_mix(table, scenario, year, single)
    scale = PER_CAPITA_BASIS / persons
    return {fuel: value * scale for fuel, value in mix.items()}


def scenario_delta(a: float, b: float) -> float:
    """Signed relative change (b - a) / a."""
    if a == 0.0:
        raise ZeroBaseline("relative change undefined for zero baseline")
    return (b - a) / a


def build_report(table: ScenarioTable, scenario: str, year: int, region: RegionFilter) -> MetricsReport:
    """Assemble every metric for one (scenario, year, region) cell.

    Rates that hit an empty denominator are reported as None rather than
    aborting the whole report.
    """
    road_region = RegionFilter(
        states=region.states,
        vclasses=frozenset(v for v in region.vclasses if v.is_road) or frozenset(ROAD_CLASSES),
        name=region.name,
    )
    try:
        energy_frac = ev_energy_fraction(table, scenario, year, region)
    except EmptyDenominator:
        energy_frac = None
    try:
        fleet_frac = ev_fleet_fraction(table, scenario, year, road_region)
    except EmptyDenominator:
        fleet_frac = None

    per_capita: dict[str, dict[Fuel, float]] = {}
    states = sorted({r.state for r in table.energy if r.scenario == scenario and r.year == year})
    for state in states:
        if not region.admits_state(state):
            continue
        try:
            per_capita[state] = fuel_mix_per_capita(table, scenario, year, state, region)
        except MissingPopulation:
            continue

    return MetricsReport(
        scenario=scenario,
        year=year,
        region=region,
        ev_energy_fraction=energy_frac,
        ev_fleet_fraction=fleet_frac,
        fuel_mix=fuel_mix(table, scenario, year, region),
        fuel_mix_per_capita=per_capita,
    )
