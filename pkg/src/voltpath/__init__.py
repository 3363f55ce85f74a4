"""voltpath: downscale annual transportation-energy scenarios into hourly
balancing-authority charging loads and scenario-comparison metrics."""

__version__ = "0.1.0"

from .ingest import (  # noqa: F401
    BAAllocationMap,
    EnergyRecord,
    FleetRecord,
    Fuel,
    PopulationRecord,
    Powertrain,
    ScenarioTable,
    VehicleClass,
    load_ba_map,
    parse_scenario_csv,
    validate_table,
)
from .metrics import (  # noqa: F401
    RegionFilter,
    ev_energy_fraction,
    ev_fleet_fraction,
    fuel_mix,
    fuel_mix_per_capita,
    scenario_delta,
)
from .sessions import (  # noqa: F401
    ChargingSession,
    MobilityConfig,
    SeededRng,
    Strategy,
    StrategyMix,
    aggregate_segments,
    default_mobility_config,
    profile_delayed,
    profile_immediate,
    profile_min_power,
    sample_sessions,
)
from .downscale import (  # noqa: F401
    HourlyLoadSeries,
    LoadStats,
    SeasonalProfile,
    allocate_to_bas,
    build_state_series,
    flat_series,
    load_stats,
    seasonal_average,
    seasonal_peak_gap,
)
