"""Command-line orchestration: validate, metrics, downscale, compare, all.

Exit codes are a stable contract: 0 success, 1 validation or data
findings, 2 environment/usage errors. Output files are written via a
temp-file rename, so each is either complete or absent.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .downscale import HourlyLoadSeries, UnmappedState, load_stats
from .ingest import (
    Fuel,
    IngestError,
    ROAD_CLASSES,
    ScenarioTable,
    load_ba_map,
    parse_scenario_csv,
    validate_table,
)
from .manifest import build_manifest, write_manifest
from .metrics import (
    EmptyDenominator,
    MetricsError,
    RegionFilter,
    ev_energy_fraction,
    ev_fleet_fraction,
    fuel_mix,
    fuel_mix_per_capita,
    scenario_delta,
)
from .pipeline import WECC_TOTAL_ID, build_scenario_year, thread_count
from .sessions import MONTH_DAYS

__all__ = ["main", "build_timestamps"]

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2


class MissingScenario(Exception):
    pass


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _load_tables(config: RunConfig, strict: bool = True) -> ScenarioTable:
    with open(config.energy_csv, "rb") as fh:
        table = parse_scenario_csv(fh, "energy", strict=strict)
    if config.fleet_csv is not None:
        with open(config.fleet_csv, "rb") as fh:
            table = table.merge(parse_scenario_csv(fh, "fleet", strict=strict))
    if config.population_csv is not None:
        with open(config.population_csv, "rb") as fh:
            table = table.merge(parse_scenario_csv(fh, "population", strict=strict))
    return table


def _load_ba_map(config: RunConfig):
    with open(config.ba_map_csv, "rb") as fh:
        return load_ba_map(fh)


def build_timestamps(year: int) -> list[str]:
    """8760 ISO-8601 UTC hour stamps; Feb 29 never appears."""
    stamps = []
    for month, days in enumerate(MONTH_DAYS, start=1):
        for day in range(1, days + 1):
            for hour in range(24):
                stamps.append(f"{year:04d}-{month:02d}-{day:02d}T{hour:02d}:00:00Z")
    return stamps


def cmd_validate(config: RunConfig) -> int:
    table = _load_tables(config, strict=False)
    _load_ba_map(config)  # weight and state errors surface here
    report = validate_table(table)
    if not report:
        print("validation: ok (0 violations)")
        return EXIT_OK
    for violation in report:
        print(f"violation[{violation.code}] {violation.key}: {violation.message}")
    print(f"validation: {len(report)} violation(s)")
    return EXIT_FINDINGS


def cmd_metrics(config: RunConfig) -> int:
    table = _load_tables(config)
    region = config.region
    rows: list[list[str]] = []

    def add(scenario, year, region_name, metric, tag, value) -> None:
        if value is None:
            rows.append([scenario, str(year), region_name, metric, tag, "", "empty_denominator"])
        else:
            rows.append([scenario, str(year), region_name, metric, tag, format(value, ".10g"), "ok"])

    road = [v for v in ROAD_CLASSES if v in region.vclasses] or list(ROAD_CLASSES)
    for scenario in config.scenarios:
        for year in config.years:
            try:
                add(scenario, year, region.name, "ev_energy_fraction", "all",
                    ev_energy_fraction(table, scenario, year, region))
            except EmptyDenominator:
                add(scenario, year, region.name, "ev_energy_fraction", "all", None)
            fleet_region = RegionFilter(states=region.states, vclasses=frozenset(road), name=region.name)
            try:
                add(scenario, year, region.name, "ev_fleet_fraction", "all",
                    ev_fleet_fraction(table, scenario, year, fleet_region))
            except EmptyDenominator:
                add(scenario, year, region.name, "ev_fleet_fraction", "all", None)
            for vclass in road:
                single = RegionFilter(states=region.states, vclasses=frozenset({vclass}), name=region.name)
                try:
                    add(scenario, year, region.name, "ev_energy_fraction", vclass.value,
                        ev_energy_fraction(table, scenario, year, single))
                except EmptyDenominator:
                    add(scenario, year, region.name, "ev_energy_fraction", vclass.value, None)
                try:
                    add(scenario, year, region.name, "ev_fleet_fraction", vclass.value,
                        ev_fleet_fraction(table, scenario, year, single))
                except EmptyDenominator:
                    add(scenario, year, region.name, "ev_fleet_fraction", vclass.value, None)
            mix = fuel_mix(table, scenario, year, region)
            for fuel in Fuel:
                add(scenario, year, region.name, "fuel_mix", fuel.value, mix[fuel])
            states = sorted(
                {r.state for r in table.energy if r.scenario == scenario and r.year == year}
            )
            for state in states:
                if not region.admits_state(state):
                    continue
                try:
                    per_capita = fuel_mix_per_capita(table, scenario, year, state, region)
                except MetricsError:
                    continue
                for fuel in Fuel:
                    add(scenario, year, state, "fuel_mix_per_10m", fuel.value, per_capita[fuel])

    rows.sort(key=lambda r: (r[0], int(r[1]), r[2], r[3], r[4]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scenario", "year", "region", "metric", "fuel_or_class", "value", "status"])
    writer.writerows(rows)
    out_path = config.out_dir / "metrics.csv"
    _atomic_write(out_path, buf.getvalue())
    print(f"wrote {out_path} ({len(rows)} rows)")
    return EXIT_OK


def loads_path(config: RunConfig, scenario: str, year: int) -> Path:
    return config.out_dir / f"loads_{scenario}_{year}.csv"


def cmd_downscale(config: RunConfig) -> int:
    table = _load_tables(config)
    ba_map = _load_ba_map(config)
    workers = thread_count()

    counts = {
        "energy_records": len(table.energy),
        "fleet_records": len(table.fleet),
        "population_records": len(table.population),
        "ba_map_entries": len(ba_map.entries),
        "scenario_years": 0,
        "sessions_simulated": 0,
        "sessions_clipped": 0,
        "ba_series_written": 0,
    }

    results = []
    for scenario in config.scenarios:
        for year in config.years:
            loads = build_scenario_year(config, table, ba_map, scenario, year, max_workers=workers)
            results.append(loads)

    for loads in results:
        stamps = build_timestamps(loads.year)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["timestamp_utc", "ba_id", "load_MW"])
        for ba_id in sorted(loads.ba_series):
            values = loads.ba_series[ba_id].values
            for stamp, value in zip(stamps, values):
                writer.writerow([stamp, ba_id, format(value, ".6f")])
        path = loads_path(config, loads.scenario, loads.year)
        _atomic_write(path, buf.getvalue())
        counts["scenario_years"] += 1
        counts["sessions_simulated"] += loads.session_count
        counts["sessions_clipped"] += loads.clipped_count
        counts["ba_series_written"] += len(loads.ba_series)
        print(f"wrote {path} ({len(loads.ba_series)} series)")

    manifest = build_manifest(config, counts)
    write_manifest(manifest, config.out_dir / "manifest.json")
    print(f"wrote {config.out_dir / 'manifest.json'}")
    return EXIT_OK


def read_loads_csv(path: Path, ba_id: str = WECC_TOTAL_ID) -> list[float]:
    """Hourly MW values for one BA from a loads CSV, in row order."""
    values = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["timestamp_utc", "ba_id", "load_MW"]:
            raise IngestError(f"unexpected loads header in {path}: {header}")
        for row in reader:
            if row and row[1] == ba_id:
                values.append(float(row[2]))
    return values


def cmd_compare(config: RunConfig, scenario_a: str, scenario_b: str) -> int:
    table = _load_tables(config)
    region = config.region
    road = frozenset(v for v in ROAD_CLASSES if v in region.vclasses) or frozenset(ROAD_CLASSES)
    fleet_region = RegionFilter(states=region.states, vclasses=road, name=region.name)

    rows = []
    for year in config.years:
        pair_values = {}
        for scenario in (scenario_a, scenario_b):
            path = loads_path(config, scenario, year)
            if not path.exists():
                raise MissingScenario(f"no downscale output for {scenario}/{year} at {path}")
            series = read_loads_csv(path)
            if len(series) != 8760:
                raise MissingScenario(f"{path} has {len(series)} WECC_TOTAL hours, expected 8760")
            stats = load_stats(HourlyLoadSeries(WECC_TOTAL_ID, scenario, year, np.array(series)))
            pair_values[scenario] = stats

        for metric, getter, unit in (
            ("peak_load_mw", lambda s: s.peak_mw, "MW"),
            ("load_spread_mw", lambda s: s.spread_mw, "MW"),
        ):
            a = getter(pair_values[scenario_a])
            b = getter(pair_values[scenario_b])
            delta = "" if a == 0 else format(scenario_delta(a, b), ".10g")
            rows.append([scenario_a, scenario_b, str(year), metric,
                         format(a, ".10g"), format(b, ".10g"), delta, unit])

        for metric, fn, reg in (
            ("ev_energy_fraction", ev_energy_fraction, region),
            ("ev_fleet_fraction", ev_fleet_fraction, fleet_region),
        ):
            try:
                a = fn(table, scenario_a, year, reg)
                b = fn(table, scenario_b, year, reg)
            except EmptyDenominator:
                rows.append([scenario_a, scenario_b, str(year), metric, "", "", "", "fraction"])
                continue
            delta = "" if a == 0 else format(scenario_delta(a, b), ".10g")
            rows.append([scenario_a, scenario_b, str(year), metric,
                         format(a, ".10g"), format(b, ".10g"), delta, "fraction"])

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scenario_a", "scenario_b", "year", "metric", "value_a", "value_b", "delta", "unit"])
    writer.writerows(rows)
    out_path = config.out_dir / f"comparison_{scenario_a}_vs_{scenario_b}.csv"
    _atomic_write(out_path, buf.getvalue())
    print(f"wrote {out_path} ({len(rows)} rows)")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voltpath",
        description="Downscale annual transportation-energy scenarios into hourly BA charging loads",
    )
    parser.add_argument("--version", action="version", version=f"voltpath {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("validate", "check inputs against the table invariants"),
        ("metrics", "compute electrification rates and fuel mixes"),
        ("downscale", "build hourly BA load series"),
        ("compare", "relative deltas between two scenarios"),
        ("all", "validate, metrics, downscale, and pairwise compares"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the run config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--scenario", action="append", default=None, help="restrict to scenario (repeatable)")
        p.add_argument("--year", action="append", type=int, default=None, help="restrict to year (repeatable)")
        if name == "compare":
            p.add_argument("scenario_a")
            p.add_argument("scenario_b")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    overrides: dict[str, str] = {}
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.out is not None:
        overrides["out_dir"] = str(Path(args.out).resolve())
    if args.scenario:
        overrides["scenarios"] = ",".join(args.scenario)
    if args.year:
        overrides["years"] = ",".join(str(y) for y in args.year)

    try:
        config = load_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "validate":
            return cmd_validate(config)
        if args.command == "metrics":
            return cmd_metrics(config)
        if args.command == "downscale":
            return cmd_downscale(config)
        if args.command == "compare":
            return cmd_compare(config, args.scenario_a, args.scenario_b)
        if args.command == "all":
            status = cmd_validate(config)
            if status != EXIT_OK:
                return status
            status = cmd_metrics(config)
            if status != EXIT_OK:
                return status
            status = cmd_downscale(config)
            if status != EXIT_OK:
                return status
            for i, a in enumerate(config.scenarios):
                for b in config.scenarios[i + 1 :]:
                    status = cmd_compare(config, a, b)
                    if status != EXIT_OK:
                        return status
            return EXIT_OK
        raise AssertionError(f"unknown command {args.command}")
    except UnmappedState as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FINDINGS
    except (IngestError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MissingScenario as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
