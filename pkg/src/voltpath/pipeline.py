"""End-to-end downscaling pipeline: scenario tables -> hourly BA loads.

Work is parallelizable across (scenario, year, state, vclass) units; each
unit derives its own random stream, and all reductions run in canonical
sorted order so outputs are byte-identical for any thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .config import RunConfig
from .downscale import (
    HOURS_PER_YEAR,
    HourlyLoadSeries,
    UnmappedState,
    allocate_to_bas,
    build_state_series,
    flat_series,
)
from .ingest import BAAllocationMap, Fuel, ScenarioTable, VehicleClass, ROAD_CLASSES
from .sessions import (
    FleetSpec,
    NoFeasibleWindow,
    RouteSpec,
    SampleCounters,
    SeededRng,
    aggregate_segments,
    minutes_in_month,
    profile,
    sample_sessions,
    split_enroute,
    MINUTES_PER_DAY,
)

__all__ = ["ScenarioYearLoads", "simulate_vclass_shapes", "build_scenario_year", "thread_count"]

WECC_TOTAL_ID = "WECC_TOTAL"


def thread_count() -> int:
    """Worker cap from VOLTPATH_THREADS; defaults to the CPU count."""
    raw = os.environ.get("VOLTPATH_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"VOLTPATH_THREADS must be an integer, got {raw!r}") from None
        return max(1, n)
    return max(1, os.cpu_count() or 1)


@dataclass
class ScenarioYearLoads:
    """Downscaled loads for one scenario-year."""

    scenario: str
    year: int
    ba_series: dict[str, HourlyLoadSeries]
    state_series: dict[str, HourlyLoadSeries]
    session_count: int = 0
    clipped_count: int = 0

    @property
    def wecc_total(self) -> HourlyLoadSeries:
        return self.ba_series[WECC_TOTAL_ID]


def _electric_ej(table: ScenarioTable, scenario: str, year: int, state: str, vclass: VehicleClass) -> float:
    total = 0.0
    for r in table.energy:
        if (
            r.scenario == scenario
            and r.year == year
            and r.state == state
            and r.vclass is vclass
            and r.fuel is Fuel.ELECTRICITY
        ):
            total += r.energy_ej
    return total


def _route_for(session, mobility) -> RouteSpec | None:
    """Daily-cycle route preceding a depot dwell: the vehicle left the
    depot one day-length before this arrival, minus the dwell itself."""
    route_minutes = MINUTES_PER_DAY - session.dwell_minutes
    depot_departure = session.arrival_min - route_minutes
    if depot_departure < 0.0:
        depot_departure = 0.0
    span = session.arrival_min - depot_departure
    buffers = mobility.enroute_start_buffer_min + mobility.enroute_end_buffer_min
    if span <= buffers + 2.0:  # need at least a 2-minute integer window
        return None
    return RouteSpec(
        depot_departure_min=depot_departure,
        depot_arrival_min=session.arrival_min,
        start_buffer_min=mobility.enroute_start_buffer_min,
        end_buffer_min=mobility.enroute_end_buffer_min,
        enroute_energy_share=mobility.enroute_energy_share,
    )


def simulate_vclass_shapes(
    config: RunConfig,
    scenario: str,
    year: int,
    state: str,
    vclass: VehicleClass,
    counters: SampleCounters | None = None,
) -> dict[int, np.ndarray]:
    """Twelve monthly hourly shapes (kW) for one road-class unit."""
    mobility = config.mobility
    mix = mobility.strategy_mix_for(scenario, year)
    seeded = SeededRng(config.seed)
    count = mobility.sessions_per_month.get(vclass, 0)
    utc_shift = config.utc_shift_minutes(state)
    enroute = (
        config.enroute_enabled
        and vclass in (VehicleClass.MDV, VehicleClass.HDV)
        and mobility.enroute_energy_share > 0.0
    )

    shapes: dict[int, np.ndarray] = {}
    for month in range(1, 13):
        rng = seeded.stream(scenario, year, state, vclass, month)
        sessions = sample_sessions(
            mobility,
            FleetSpec(state=state, vclass=vclass, count=count),
            month,
            mix,
            rng,
            utc_shift_min=utc_shift,
            counters=counters,
        )
        segments = []
        month_end = float(minutes_in_month(month))
        for session in sessions:
            children = (session,)
            if enroute:
                route = _route_for(session, mobility)
                if route is not None:
                    try:
                        depot, road = split_enroute(session, route, rng)
                        children = tuple(c for c in (depot, road) if c is not None)
                    except NoFeasibleWindow:
                        children = (session,)
            for child in children:
                if child.departure_min > month_end:  # defensive; sampling truncates already
                    continue
                segments.extend(profile(child))
        shapes[month] = aggregate_segments(segments, month)
    return shapes


def _simulate_unit(args) -> tuple[tuple, dict[int, np.ndarray], int]:
    config, scenario, year, state, vclass = args
    counters = SampleCounters()
    shapes = simulate_vclass_shapes(config, scenario, year, state, vclass, counters)
    return ((scenario, year, state, vclass.value), shapes, counters.clipped_total)


def build_scenario_year(
    config: RunConfig,
    table: ScenarioTable,
    ba_map: BAAllocationMap,
    scenario: str,
    year: int,
    max_workers: int | None = None,
) -> ScenarioYearLoads:
    """Downscale one scenario-year to state and BA hourly series."""
    region = config.region
    states = [s for s in table.states() if region.admits_state(s)]
    states = sorted(
        s
        for s in states
        if any(r.scenario == scenario and r.year == year and r.state == s for r in table.energy)
    )

    # fail before any simulation if the map cannot cover the work
    for state in states:
        for vclass in sorted(region.vclasses, key=lambda v: v.value):
            if _electric_ej(table, scenario, year, state, vclass) > 0.0 and not ba_map.covers(
                state, vclass.group
            ):
                raise UnmappedState(f"ba_map does not cover ({state}, {vclass.group})")

    road_units = [
        (config, scenario, year, state, vclass)
        for state in states
        for vclass in ROAD_CLASSES
        if vclass in region.vclasses and _electric_ej(table, scenario, year, state, vclass) > 0.0
    ]

    workers = max_workers if max_workers is not None else thread_count()
    results: dict[tuple, dict[int, np.ndarray]] = {}
    clipped = 0
    if road_units:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for key, shapes, nclip in pool.map(_simulate_unit, road_units):
                    results[key] = shapes
                    clipped += nclip
        else:
            for unit in road_units:
                key, shapes, nclip = _simulate_unit(unit)
                results[key] = shapes
                clipped += nclip

    mobility = config.mobility
    session_count = sum(
        mobility.sessions_per_month.get(unit[4], 0) * 12 for unit in road_units
    )

    state_series: dict[str, HourlyLoadSeries] = {}
    ba_values: dict[str, np.ndarray] = {}
    for state in states:  # canonical order: states then classes
        class_series: dict[VehicleClass, HourlyLoadSeries] = {}
        for vclass in sorted(region.vclasses, key=lambda v: v.value):
            energy_ej = _electric_ej(table, scenario, year, state, vclass)
            if vclass.is_road:
                key = (scenario, year, state, vclass.value)
                if key not in results:
                    continue
                factors = mobility.monthly_ldv_factors if vclass is VehicleClass.LDV else None
                class_series[vclass] = build_state_series(
                    energy_ej,
                    results[key],
                    factors,
                    entity=state,
                    scenario=scenario,
                    year=year,
                )
            elif energy_ej > 0.0:
                class_series[vclass] = flat_series(
                    energy_ej, entity=state, scenario=scenario, year=year
                )

        total = np.zeros(HOURS_PER_YEAR)
        by_group: dict[str, np.ndarray] = {}
        for vclass, series in sorted(class_series.items(), key=lambda kv: kv[0].value):
            total += series.values
            group_values = by_group.setdefault(vclass.group, np.zeros(HOURS_PER_YEAR))
            group_values += series.values
        state_series[state] = HourlyLoadSeries(state, scenario, year, total)

        for group in sorted(by_group):
            group_series = HourlyLoadSeries(state, scenario, year, by_group[group])
            for ba_id, ba_series in sorted(allocate_to_bas(group_series, ba_map, group).items()):
                acc = ba_values.setdefault(ba_id, np.zeros(HOURS_PER_YEAR))
                acc += ba_series.values

    ba_series = {
        ba_id: HourlyLoadSeries(ba_id, scenario, year, values)
        for ba_id, values in sorted(ba_values.items())
    }
    wecc = np.zeros(HOURS_PER_YEAR)
    for state in sorted(state_series):
        wecc += state_series[state].values
    ba_series[WECC_TOTAL_ID] = HourlyLoadSeries(WECC_TOTAL_ID, scenario, year, wecc)

    return ScenarioYearLoads(
        scenario=scenario,
        year=year,
        ba_series=ba_series,
        state_series=state_series,
        session_count=session_count,
        clipped_count=clipped,
    )
