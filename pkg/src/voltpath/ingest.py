"""Parsing, validation, and normalization of annual scenario tables.

Input files are comma-delimited UTF-8 text with one header row:

    energy:     scenario,year,state,vclass,fuel,energy_EJ
    fleet:      scenario,year,state,vclass,powertrain,count
    population: state,year,persons
    ba_map:     state,vclass_group,ba_id,weight

Enum tokens are lowercase (``ldv``, ``electricity``, ``ev``, ...). All
energies are EJ/year at ingestion; unit conversion happens downstream in
the downscaler, never here.
"""

from __future__ import annotations

import csv
import enum
import io
import re
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Mapping, Sequence

__all__ = [
    "VehicleClass",
    "Fuel",
    "Powertrain",
    "EnergyRecord",
    "FleetRecord",
    "PopulationRecord",
    "ScenarioTable",
    "BAAllocationMap",
    "Violation",
    "IngestError",
    "MalformedHeader",
    "BadValue",
    "DuplicateKey",
    "WeightSumError",
    "UnknownState",
    "parse_scenario_csv",
    "validate_table",
    "load_ba_map",
    "write_scenario_csv",
    "US_STATES",
]

SCENARIO_ID_RE = re.compile(r"^[a-z0-9_]+$")

# 50 states plus DC; membership check only, no regional meaning.
US_STATES = frozenset(
    "AL AK AZ AR CA CO CT DE DC FL GA HI ID IL IN IA KS KY LA ME MD MA MI MN "
    "MS MO MT NE NV NH NJ NM NY NC ND OH OK OR PA RI SC SD TN TX UT VT VA WA "
    "WV WI WY".split()
)

YEAR_MIN = 2015
YEAR_MAX = 2100
YEAR_STEP = 5

BA_WEIGHT_TOL = 1e-6  # renormalize below this deviation, reject above


class VehicleClass(enum.Enum):
    """Transportation demand classes; Rail/Aviation/Ship carry flat profiles."""

    LDV = "ldv"
    MDV = "mdv"
    HDV = "hdv"
    RAIL = "rail"
    AVIATION = "aviation"
    SHIP = "ship"

    @property
    def is_road(self) -> bool:
        return self in (VehicleClass.LDV, VehicleClass.MDV, VehicleClass.HDV)

    @property
    def is_flat_profile(self) -> bool:
        return not self.is_road

    @property
    def group(self) -> str:
        """Spatial-allocation group: road classes share one BA partition."""
        return "road" if self.is_road else self.value


ROAD_CLASSES = (VehicleClass.LDV, VehicleClass.MDV, VehicleClass.HDV)
VCLASS_GROUPS = ("road", "rail", "aviation", "ship")


class Fuel(enum.Enum):
    ELECTRICITY = "electricity"
    REFINED_LIQUIDS = "refined_liquids"
    HYDROGEN = "hydrogen"


class Powertrain(enum.Enum):
    EV = "ev"
    NON_EV = "non_ev"


class IngestError(Exception):
    """Base class for ingestion failures."""


class MalformedHeader(IngestError):
    pass


class BadValue(IngestError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


class DuplicateKey(IngestError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


class WeightSumError(IngestError):
    pass


class UnknownState(IngestError):
    pass


@dataclass(frozen=True)
class EnergyRecord:
    scenario: str
    year: int
    state: str
    vclass: VehicleClass
    fuel: Fuel
    energy_ej: float

    @property
    def key(self) -> tuple:
        return (self.scenario, self.year, self.state, self.vclass, self.fuel)


@dataclass(frozen=True)
class FleetRecord:
    scenario: str
    year: int
    state: str
    vclass: VehicleClass
    powertrain: Powertrain
    count: float

    @property
    def key(self) -> tuple:
        return (self.scenario, self.year, self.state, self.vclass, self.powertrain)


@dataclass(frozen=True)
class PopulationRecord:
    state: str
    year: int
    persons: float

    @property
    def key(self) -> tuple:
        return (self.state, self.year)


@dataclass(frozen=True)
class ScenarioTable:
    """Normalized annual records; immutable, safe to share across threads."""

    energy: tuple[EnergyRecord, ...] = ()
    fleet: tuple[FleetRecord, ...] = ()
    population: tuple[PopulationRecord, ...] = ()

    def merge(self, other: "ScenarioTable") -> "ScenarioTable":
        return ScenarioTable(
            energy=self.energy + other.energy,
            fleet=self.fleet + other.fleet,
            population=self.population + other.population,
        )

    def scenarios(self) -> list[str]:
        return sorted({r.scenario for r in self.energy})

    def years(self) -> list[int]:
        return sorted({r.year for r in self.energy})

    def states(self) -> list[str]:
        return sorted({r.state for r in self.energy})

    def population_of(self, state: str, year: int) -> float | None:
        for r in self.population:
            if r.state == state and r.year == year:
                return r.persons
        return None


@dataclass(frozen=True)
class Violation:
    """One invariant violation; validation findings are data, not failures."""

    code: str
    key: str
    message: str


ValidationReport = list


HEADERS = {
    "energy": ["scenario", "year", "state", "vclass", "fuel", "energy_EJ"],
    "fleet": ["scenario", "year", "state", "vclass", "powertrain", "count"],
    "population": ["state", "year", "persons"],
    "ba_map": ["state", "vclass_group", "ba_id", "weight"],
}


def _text_reader(source: BinaryIO | bytes) -> csv.reader:
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    return csv.reader(io.TextIOWrapper(source, encoding="utf-8", newline=""))


def _check_header(row: list[str] | None, kind: str) -> None:
    expected = HEADERS[kind]
    got = [c.strip() for c in row] if row is not None else []
    if got != expected:
        raise MalformedHeader(
            f"{kind} header must be {','.join(expected)!r}, got {','.join(got)!r}"
        )


def _parse_float(token: str, what: str, row: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise BadValue(f"non-numeric {what}: {token!r}", row) from None
    if value != value:  # NaN
        raise BadValue(f"non-numeric {what}: {token!r}", row)
    return value


def _parse_int(token: str, what: str, row: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise BadValue(f"non-integer {what}: {token!r}", row) from None


def _parse_enum(token: str, enum_cls, what: str, row: int):
    try:
        return enum_cls(token.strip().lower())
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise BadValue(f"unknown {what} token {token!r} (allowed: {allowed})", row) from None


def _parse_scenario_id(token: str, row: int) -> str:
    token = token.strip()
    if not token or not SCENARIO_ID_RE.match(token):
        raise BadValue(f"bad scenario id {token!r} (lowercase alphanumeric/underscore)", row)
    return token


def _parse_state(token: str, row: int) -> str:
    token = token.strip().upper()
    if token not in US_STATES:
        raise BadValue(f"unknown state code {token!r}", row)
    return token


def parse_scenario_csv(source: BinaryIO | bytes, kind: str, strict: bool = True) -> ScenarioTable:
    """Parse one delimited file into a ScenarioTable fragment.

    ``kind`` selects the schema: ``energy``, ``fleet``, or ``population``.
    With ``strict=True`` (the default) negative energies/counts, non-positive
    populations, and duplicate keys raise; with ``strict=False`` those rows
    are kept so that ``validate_table`` can report them as findings instead.
    Malformed headers, non-numeric fields, and unknown enum tokens always
    raise because the row cannot be represented at all.
    """
    if kind not in ("energy", "fleet", "population"):
        raise ValueError(f"unknown kind {kind!r}")
    reader = _text_reader(source)
    _check_header(next(reader, None), kind)

    energy: list[EnergyRecord] = []
    fleet: list[FleetRecord] = []
    population: list[PopulationRecord] = []
    seen: set[tuple] = set()

    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        row = [c.strip() for c in row]
        if len(row) != len(HEADERS[kind]):
            raise BadValue(f"expected {len(HEADERS[kind])} fields, got {len(row)}", lineno)
        if kind == "energy":
            rec = EnergyRecord(
                scenario=_parse_scenario_id(row[0], lineno),
                year=_parse_int(row[1], "year", lineno),
                state=_parse_state(row[2], lineno),
                vclass=_parse_enum(row[3], VehicleClass, "vclass", lineno),
                fuel=_parse_enum(row[4], Fuel, "fuel", lineno),
                energy_ej=_parse_float(row[5], "energy_EJ", lineno),
            )
            if strict and rec.energy_ej < 0:
                raise BadValue(f"negative energy {rec.energy_ej}", lineno)
            _note_key(rec.key, seen, lineno, strict)
            energy.append(rec)
        elif kind == "fleet":
            vclass = _parse_enum(row[3], VehicleClass, "vclass", lineno)
            if not vclass.is_road:
                raise BadValue(f"fleet vclass must be ldv/mdv/hdv, got {row[3]!r}", lineno)
            rec = FleetRecord(
                scenario=_parse_scenario_id(row[0], lineno),
                year=_parse_int(row[1], "year", lineno),
                state=_parse_state(row[2], lineno),
                vclass=vclass,
                powertrain=_parse_enum(row[4], Powertrain, "powertrain", lineno),
                count=_parse_float(row[5], "count", lineno),
            )
            if strict and rec.count < 0:
                raise BadValue(f"negative count {rec.count}", lineno)
            _note_key(rec.key, seen, lineno, strict)
            fleet.append(rec)
        else:
            rec = PopulationRecord(
                state=_parse_state(row[0], lineno),
                year=_parse_int(row[1], "year", lineno),
                persons=_parse_float(row[2], "persons", lineno),
            )
            if strict and rec.persons <= 0:
                raise BadValue(f"persons must be positive, got {rec.persons}", lineno)
            _note_key(rec.key, seen, lineno, strict)
            population.append(rec)

    return ScenarioTable(energy=tuple(energy), fleet=tuple(fleet), population=tuple(population))


def _note_key(key: tuple, seen: set, lineno: int, strict: bool) -> None:
    if key in seen and strict:
        raise DuplicateKey(f"duplicate key {key}", lineno)
    seen.add(key)


def validate_table(table: ScenarioTable) -> ValidationReport:
    """Report every invariant violation; never mutates or raises."""
    report: list[Violation] = []

    def bad(code: str, key, message: str) -> None:
        report.append(Violation(code=code, key=str(key), message=message))

    seen: set[tuple] = set()
    for rec in table.energy:
        if rec.energy_ej < 0:
            bad("negative_energy", rec.key, f"energy {rec.energy_ej} EJ < 0")
        _check_year(rec.year, rec.key, bad)
        if rec.key in seen:
            bad("duplicate_key", rec.key, "duplicate energy record")
        seen.add(rec.key)

    seen.clear()
    energy_keys = {(r.scenario, r.year, r.state) for r in table.energy}
    for rec in table.fleet:
        if rec.count < 0:
            bad("negative_count", rec.key, f"count {rec.count} < 0")
        _check_year(rec.year, rec.key, bad)
        if rec.key in seen:
            bad("duplicate_key", rec.key, "duplicate fleet record")
        seen.add(rec.key)
        if (rec.scenario, rec.year, rec.state) not in energy_keys:
            bad("orphan_fleet", rec.key, "fleet record with no energy records for its (scenario, year, state)")

    seen.clear()
    for rec in table.population:
        if rec.persons <= 0:
            bad("nonpositive_population", rec.key, f"persons {rec.persons} <= 0")
        if rec.key in seen:
            bad("duplicate_key", rec.key, "duplicate population record")
        seen.add(rec.key)

    return report


def _check_year(year: int, key, bad) -> None:
    if not (YEAR_MIN <= year <= YEAR_MAX):
        bad("year_out_of_range", key, f"year {year} outside [{YEAR_MIN}, {YEAR_MAX}]")
    elif year % YEAR_STEP != 0:
        bad("year_not_step", key, f"year {year} not a multiple of {YEAR_STEP}")


@dataclass(frozen=True)
class BAAllocationMap:
    """State -> balancing-authority weight partition, per vclass group.

    Weights for each (state, group) key sum to 1 within 1e-9 after loading.
    """

    entries: Mapping[tuple[str, str], tuple[tuple[str, float], ...]]

    def weights_for(self, state: str, group: str) -> tuple[tuple[str, float], ...]:
        try:
            return self.entries[(state, group)]
        except KeyError:
            raise UnknownState(f"no allocation for state {state!r}, group {group!r}") from None

    def covers(self, state: str, group: str) -> bool:
        return (state, group) in self.entries

    def ba_ids(self) -> list[str]:
        return sorted({ba for shares in self.entries.values() for ba, _ in shares})


def load_ba_map(source: BinaryIO | bytes) -> BAAllocationMap:
    """Load and normalize the state -> BA weight map.

    Weight sums within ``BA_WEIGHT_TOL`` of 1 are renormalized to exactly 1;
    larger deviations raise ``WeightSumError``.
    """
    reader = _text_reader(source)
    _check_header(next(reader, None), "ba_map")

    raw: dict[tuple[str, str], list[tuple[str, float]]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        row = [c.strip() for c in row]
        if len(row) != 4:
            raise BadValue(f"expected 4 fields, got {len(row)}", lineno)
        state = row[0].upper()
        if state not in US_STATES:
            raise UnknownState(f"row {lineno}: unknown state code {row[0]!r}")
        group = row[1].lower()
        if group not in VCLASS_GROUPS:
            raise BadValue(f"unknown vclass_group {row[1]!r} (allowed: {', '.join(VCLASS_GROUPS)})", lineno)
        ba_id = row[2]
        if not ba_id:
            raise BadValue("empty ba_id", lineno)
        weight = _parse_float(row[3], "weight", lineno)
        if not (0.0 <= weight <= 1.0):
            raise BadValue(f"weight {weight} outside [0, 1]", lineno)
        raw.setdefault((state, group), []).append((ba_id, weight))

    entries: dict[tuple[str, str], tuple[tuple[str, float], ...]] = {}
    for key, shares in raw.items():
        total = sum(w for _, w in shares)
        if abs(total - 1.0) > BA_WEIGHT_TOL:
            raise WeightSumError(
                f"weights for {key} sum to {total!r}, deviation exceeds {BA_WEIGHT_TOL}"
            )
        entries[key] = tuple((ba, w / total) for ba, w in shares)
    return BAAllocationMap(entries=entries)


def write_scenario_csv(table: ScenarioTable, kind: str) -> bytes:
    """Serialize one fragment back to the canonical CSV layout.

    Rows are emitted in sorted key order so that parse -> write -> parse is
    stable; floats use repr, which round-trips exactly.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADERS[kind])
    if kind == "energy":
        for r in sorted(table.energy, key=lambda r: (r.scenario, r.year, r.state, r.vclass.value, r.fuel.value)):
            writer.writerow([r.scenario, r.year, r.state, r.vclass.value, r.fuel.value, repr(r.energy_ej)])
    elif kind == "fleet":
        for r in sorted(table.fleet, key=lambda r: (r.scenario, r.year, r.state, r.vclass.value, r.powertrain.value)):
            writer.writerow([r.scenario, r.year, r.state, r.vclass.value, r.powertrain.value, repr(r.count)])
    elif kind == "population":
        for r in sorted(table.population, key=lambda r: (r.state, r.year)):
            writer.writerow([r.state, r.year, repr(r.persons)])
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return buf.getvalue().encode("utf-8")
