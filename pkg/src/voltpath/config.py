"""Run configuration: flat key-value config files plus defaults.

Config files are plain text, one ``key = value`` per line, ``#`` comments.
Lists are comma-separated. The full key schema is documented in the
README; everything mobility-related has defaults and is overridable.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .ingest import US_STATES, VehicleClass
from .metrics import RegionFilter
from .sessions import (
    ArrivalDwellComponent,
    BadConfig,
    MobilityConfig,
    Strategy,
    StrategyMix,
    TruncatedNormal,
    default_mobility_config,
)

__all__ = ["RunConfig", "ConfigError", "load_config", "parse_kv_text", "DEFAULT_UTC_OFFSETS"]


class ConfigError(Exception):
    pass


# Standard-time offsets (no DST), hours relative to UTC.
DEFAULT_UTC_OFFSETS: dict[str, float] = {}
for _st in "CT DE DC FL GA IN KY ME MD MA MI NH NJ NY NC OH PA RI SC VT VA WV".split():
    DEFAULT_UTC_OFFSETS[_st] = -5.0
for _st in "AL AR IL IA KS LA MN MS MO NE ND OK SD TN TX WI".split():
    DEFAULT_UTC_OFFSETS[_st] = -6.0
for _st in "AZ CO ID MT NM UT WY NV".split():
    DEFAULT_UTC_OFFSETS[_st] = -7.0
for _st in "CA OR WA".split():
    DEFAULT_UTC_OFFSETS[_st] = -8.0
DEFAULT_UTC_OFFSETS["AK"] = -9.0
DEFAULT_UTC_OFFSETS["HI"] = -10.0

# Western Interconnection states; used when region_states = wecc
WECC_STATES = frozenset("WA OR CA NV AZ UT ID MT WY CO NM".split())


@dataclass(frozen=True)
class RunConfig:
    energy_csv: Path
    ba_map_csv: Path
    fleet_csv: Path | None = None
    population_csv: Path | None = None
    scenarios: tuple[str, ...] = ()
    years: tuple[int, ...] = ()
    region: RegionFilter = field(default_factory=RegionFilter)
    seed: int = 0
    out_dir: Path = Path("out")
    mobility: MobilityConfig = field(default_factory=default_mobility_config)
    utc_offsets: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_UTC_OFFSETS))
    enroute_enabled: bool = True

    def __post_init__(self):
        if not self.scenarios:
            raise ConfigError("at least one scenario is required")
        for year in self.years:
            if year % 5 != 0:
                raise ConfigError(f"year {year} is not a multiple of 5")

    def utc_shift_minutes(self, state: str) -> float:
        """Minutes to add to local clock time to obtain UTC."""
        offset = self.utc_offsets.get(state)
        if offset is None:
            raise ConfigError(f"no UTC offset configured for state {state!r}")
        return -offset * 60.0

    def canonical_items(self) -> list[tuple[str, str]]:
        """Flat, sorted (key, value) view of every effective field; the
        manifest digests this, so it must change iff any field changes."""
        out: list[tuple[str, str]] = []
        _flatten("", self, out)
        return sorted(out)


def _flatten(prefix: str, obj, out: list[tuple[str, str]]) -> None:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        for f in sorted(dataclasses.fields(obj), key=lambda f: f.name):
            _flatten(f"{prefix}.{f.name}" if prefix else f.name, getattr(obj, f.name), out)
    elif isinstance(obj, Mapping):
        for key in sorted(obj, key=str):
            _flatten(f"{prefix}[{_scalar(key)}]", obj[key], out)
    elif isinstance(obj, (list, tuple, frozenset, set)):
        items = sorted(obj, key=str) if isinstance(obj, (set, frozenset)) else obj
        for i, item in enumerate(items):
            _flatten(f"{prefix}[{i}]", item, out)
    else:
        out.append((prefix, _scalar(obj)))


def _scalar(obj) -> str:
    if isinstance(obj, enum.Enum):
        return str(obj.value)
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, float):
        return repr(obj)
    return str(obj)


def parse_kv_text(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines; later keys win."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        pairs[key.strip()] = value.strip()
    return pairs


def _split_list(value: str) -> list[str]:
    return [tok.strip() for tok in value.split(",") if tok.strip()]


def _parse_mix(value: str) -> StrategyMix:
    weights: dict[Strategy, float] = {}
    for tok in _split_list(value):
        name, _, w = tok.partition(":")
        strategy = Strategy.parse(name)
        weights[strategy] = weights.get(strategy, 0.0) + float(w)
    return StrategyMix(weights)


def _parse_truncnorm(value: str, what: str) -> TruncatedNormal:
    parts = _split_list(value)
    if len(parts) != 4:
        raise ConfigError(f"{what} expects 'mean,sd,lo,hi', got {value!r}")
    mean, sd, lo, hi = (float(p) for p in parts)
    return TruncatedNormal(mean=mean, sd=sd, lo=lo, hi=hi)


def _parse_dwell(value: str, what: str) -> tuple[ArrivalDwellComponent, ...]:
    components = []
    for chunk in value.split("|"):
        fields_ = [f.strip() for f in chunk.split(":")]
        if len(fields_) != 3:
            raise ConfigError(f"{what} component expects 'weight:arrival:dwell', got {chunk!r}")
        components.append(
            ArrivalDwellComponent(
                weight=float(fields_[0]),
                arrival=_parse_truncnorm(fields_[1], f"{what} arrival"),
                dwell=_parse_truncnorm(fields_[2], f"{what} dwell"),
            )
        )
    return tuple(components)


def _parse_charger_mix(value: str, what: str) -> tuple[tuple[float, float], ...]:
    levels = []
    for tok in _split_list(value):
        kw, _, w = tok.partition(":")
        levels.append((float(kw), float(w)))
    if not levels:
        raise ConfigError(f"{what} is empty")
    return tuple(levels)


_VCLASS_BY_NAME = {v.value: v for v in VehicleClass}


def load_config(path: Path | str, overrides: Mapping[str, str] | None = None) -> RunConfig:
    """Load a config file and apply CLI overrides (same key syntax)."""
    path = Path(path)
    try:
        pairs = parse_kv_text(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if overrides:
        pairs.update(overrides)
    base = path.parent

    def take(key: str, default: str | None = None) -> str | None:
        return pairs.pop(key, default)

    def take_path(key: str, required: bool = False) -> Path | None:
        value = take(key)
        if value is None:
            if required:
                raise ConfigError(f"missing required key {key!r}")
            return None
        p = Path(value)
        return p if p.is_absolute() else base / p

    energy_csv = take_path("energy_csv", required=True)
    ba_map_csv = take_path("ba_map_csv", required=True)
    fleet_csv = take_path("fleet_csv")
    population_csv = take_path("population_csv")

    scenarios = tuple(_split_list(take("scenarios", "") or ""))
    years = tuple(int(y) for y in _split_list(take("years", "") or ""))

    states_raw = take("region_states", "")
    if states_raw.strip().lower() == "wecc":
        region_states = frozenset(WECC_STATES)
    else:
        region_states = frozenset(s.upper() for s in _split_list(states_raw))
        unknown = region_states - US_STATES
        if unknown:
            raise ConfigError(f"unknown region states: {sorted(unknown)}")
    vclasses_raw = _split_list(take("region_vclasses", "") or "")
    if vclasses_raw:
        try:
            region_vclasses = frozenset(_VCLASS_BY_NAME[v.lower()] for v in vclasses_raw)
        except KeyError as exc:
            raise ConfigError(f"unknown vehicle class {exc.args[0]!r}") from None
    else:
        region_vclasses = frozenset(VehicleClass)
    region = RegionFilter(
        states=region_states, vclasses=region_vclasses, name=take("region_name", "all") or "all"
    )

    seed = int(take("seed", "0") or "0", 0)
    out_value = take("out_dir", "out") or "out"
    out_path = Path(out_value)
    out_dir = out_path if out_path.is_absolute() else base / out_path
    enroute_enabled = (take("enroute", "true") or "true").strip().lower() in ("1", "true", "yes", "on")

    # mobility: start from defaults, replace whatever the file names
    mob = default_mobility_config()
    dwell = dict(mob.dwell)
    charger = dict(mob.charger_mix)
    energy_kwh = dict(mob.energy_kwh)
    sessions = dict(mob.sessions_per_month)
    anchors = dict(mob.strategy_mix_anchors)
    overrides_mix: dict[tuple[str, int], StrategyMix] = dict(mob.strategy_mix_overrides)
    depot_share = float(take("depot_share", str(mob.depot_share)))
    start_buffer = float(take("enroute_start_buffer_min", str(mob.enroute_start_buffer_min)))
    end_buffer = float(take("enroute_end_buffer_min", str(mob.enroute_end_buffer_min)))
    factors_raw = take("monthly_ldv_factors")
    monthly_factors = (
        tuple(float(f) for f in _split_list(factors_raw)) if factors_raw else mob.monthly_ldv_factors
    )

    utc_offsets = dict(DEFAULT_UTC_OFFSETS)

    for key in list(pairs):
        value = pairs.pop(key)
        if key.startswith("sessions_"):
            vclass = _vclass_key(key.removeprefix("sessions_"))
            sessions[vclass] = int(value)
        elif key.startswith("dwell_"):
            vclass = _vclass_key(key.removeprefix("dwell_"))
            dwell[vclass] = _parse_dwell(value, key)
        elif key.startswith("charger_mix_"):
            vclass = _vclass_key(key.removeprefix("charger_mix_"))
            charger[vclass] = _parse_charger_mix(value, key)
        elif key.startswith("energy_kwh_"):
            vclass = _vclass_key(key.removeprefix("energy_kwh_"))
            energy_kwh[vclass] = _parse_truncnorm(value, key)
        elif key.startswith("strategy_mix."):
            tail = key.removeprefix("strategy_mix.")
            if "." in tail:
                scenario, _, year = tail.rpartition(".")
                overrides_mix[(scenario, int(year))] = _parse_mix(value)
            else:
                anchors[int(tail)] = _parse_mix(value)
        elif key.startswith("utc_offset_"):
            state = key.removeprefix("utc_offset_").upper()
            if state not in US_STATES:
                raise ConfigError(f"unknown state in {key!r}")
            utc_offsets[state] = float(value)
        else:
            raise ConfigError(f"unknown config key {key!r}")

    try:
        mobility = MobilityConfig(
            dwell=dwell,
            charger_mix=charger,
            energy_kwh=energy_kwh,
            strategy_mix_anchors=anchors,
            strategy_mix_overrides=overrides_mix,
            depot_share=depot_share,
            enroute_start_buffer_min=start_buffer,
            enroute_end_buffer_min=end_buffer,
            sessions_per_month=sessions,
            monthly_ldv_factors=monthly_factors,
        )
    except BadConfig as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(
        energy_csv=energy_csv,
        ba_map_csv=ba_map_csv,
        fleet_csv=fleet_csv,
        population_csv=population_csv,
        scenarios=scenarios,
        years=years,
        region=region,
        seed=seed,
        out_dir=out_dir,
        mobility=mobility,
        utc_offsets=utc_offsets,
        enroute_enabled=enroute_enabled,
    )


def _vclass_key(token: str) -> VehicleClass:
    try:
        return _VCLASS_BY_NAME[token.lower()]
    except KeyError:
        raise ConfigError(f"unknown vehicle class {token!r}") from None
