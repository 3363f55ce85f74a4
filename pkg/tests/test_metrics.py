from __future__ import annotations

import math

import hypothesis.strategies as st
import pytest
from hypothesis import given, settings

from voltpath.ingest import (
    EnergyRecord,
    FleetRecord,
    Fuel,
    PopulationRecord,
    Powertrain,
    ScenarioTable,
    VehicleClass,
)
from voltpath.metrics import (
    EmptyDenominator,
    MissingPopulation,
    RegionFilter,
    UnsupportedClass,
    ZeroBaseline,
    ev_energy_fraction,
    ev_fleet_fraction,
    fuel_mix,
    fuel_mix_per_capita,
    scenario_delta,
)

ROAD = RegionFilter(vclasses=frozenset({VehicleClass.LDV, VehicleClass.MDV, VehicleClass.HDV}))
ALL = RegionFilter()


def energy_table(rows):
    return ScenarioTable(
        energy=tuple(EnergyRecord("s", 2035, state, v, f, e) for state, v, f, e in rows)
    )


def test_energy_fraction_matches_2025_ira_fixture_value():
    # totals built to the reported 4.9% electric share
    table = energy_table(
        [
            ("CA", VehicleClass.LDV, Fuel.ELECTRICITY, 4.9),
            ("CA", VehicleClass.LDV, Fuel.REFINED_LIQUIDS, 90.1),
            ("WY", VehicleClass.HDV, Fuel.REFINED_LIQUIDS, 5.0),
        ]
    )
    assert ev_energy_fraction(table, "s", 2035, ROAD) == pytest.approx(0.049, rel=1e-12)


def test_energy_fraction_zero_when_no_electricity():
    table = energy_table([("CA", VehicleClass.LDV, Fuel.REFINED_LIQUIDS, 3.0)])
    assert ev_energy_fraction(table, "s", 2035, ROAD) == 0.0


def test_energy_fraction_empty_denominator():
    with pytest.raises(EmptyDenominator):
        ev_energy_fraction(ScenarioTable(), "s", 2035, ROAD)


fuels = st.sampled_from(Fuel)
road_classes = st.sampled_from([VehicleClass.LDV, VehicleClass.MDV, VehicleClass.HDV])
amounts = st.floats(min_value=1e-6, max_value=100.0, allow_nan=False)


@given(st.lists(st.tuples(road_classes, fuels, amounts), min_size=1, max_size=20))
@settings(max_examples=100)
def test_energy_fraction_equals_brute_force_ratio(rows):
    table = energy_table([("CA", v, f, e) for v, f, e in rows])
    # independent oracle: plain fsum over rows, no shared helpers
    electric = math.fsum(e for v, f, e in rows if f is Fuel.ELECTRICITY)
    total = math.fsum(e for _, _, e in rows)
    got = ev_energy_fraction(table, "s", 2035, ROAD)
    assert got == pytest.approx(electric / total, rel=1e-9)
    assert 0.0 <= got <= 1.0
    non_electric = math.fsum(e for v, f, e in rows if f is not Fuel.ELECTRICITY)
    assert got == pytest.approx(1.0 - non_electric / total, rel=1e-9, abs=1e-12)


@given(st.lists(st.tuples(road_classes, fuels, amounts), min_size=1, max_size=20), st.randoms())
@settings(max_examples=50)
def test_metrics_permutation_invariant(rows, rnd):
    shuffled = list(rows)
    rnd.shuffle(shuffled)
    a = energy_table([("CA", v, f, e) for v, f, e in rows])
    b = energy_table([("CA", v, f, e) for v, f, e in shuffled])
    assert ev_energy_fraction(a, "s", 2035, ROAD) == ev_energy_fraction(b, "s", 2035, ROAD)
    assert fuel_mix(a, "s", 2035, ROAD) == fuel_mix(b, "s", 2035, ROAD)


@given(st.lists(st.tuples(fuels, amounts), min_size=1, max_size=16))
@settings(max_examples=50)
def test_fuel_mix_additive_over_state_partition(rows):
    half = len(rows) // 2
    ca = [("CA", VehicleClass.LDV, f, e) for f, e in rows[:half]]
    wy = [("WY", VehicleClass.LDV, f, e) for f, e in rows[half:]]
    whole = energy_table(ca + wy)
    mix_all = fuel_mix(whole, "s", 2035, ALL)
    mix_ca = fuel_mix(whole, "s", 2035, RegionFilter(states=frozenset({"CA"})))
    mix_wy = fuel_mix(whole, "s", 2035, RegionFilter(states=frozenset({"WY"})))
    for fuel in Fuel:
        assert mix_all[fuel] == pytest.approx(mix_ca[fuel] + mix_wy[fuel], rel=1e-12, abs=1e-15)
    total = sum(mix_all.values())
    if total > 0:
        assert sum(v / total for v in mix_all.values()) == pytest.approx(1.0, abs=1e-12)


def fleet_table(ev, non_ev, scenario="s", year=2035, vclass=VehicleClass.LDV):
    return ScenarioTable(
        energy=(EnergyRecord(scenario, year, "CA", vclass, Fuel.ELECTRICITY, 1.0),),
        fleet=(
            FleetRecord(scenario, year, "CA", vclass, Powertrain.EV, ev),
            FleetRecord(scenario, year, "CA", vclass, Powertrain.NON_EV, non_ev),
        ),
    )


def test_fleet_fraction_matches_2025_ccs_fixture_value():
    table = fleet_table(ev=286.0, non_ev=9714.0)
    assert ev_fleet_fraction(table, "s", 2035, ROAD) == pytest.approx(0.0286, rel=1e-12)


def test_fleet_fraction_2050_fixture_values():
    ccs = fleet_table(ev=5800.0, non_ev=4200.0, scenario="nz_ccs_climate")
    climate = fleet_table(ev=7000.0, non_ev=3000.0, scenario="nz_climate")
    assert ev_fleet_fraction(ccs, "nz_ccs_climate", 2035, ROAD) == pytest.approx(0.58, rel=1e-12)
    assert ev_fleet_fraction(climate, "nz_climate", 2035, ROAD) == pytest.approx(0.70, rel=1e-12)


def test_fleet_fraction_all_ev():
    table = ScenarioTable(
        energy=(EnergyRecord("s", 2035, "CA", VehicleClass.LDV, Fuel.ELECTRICITY, 1.0),),
        fleet=(FleetRecord("s", 2035, "CA", VehicleClass.LDV, Powertrain.EV, 42.0),),
    )
    assert ev_fleet_fraction(table, "s", 2035, ROAD) == 1.0


def test_fleet_fraction_rejects_flat_classes():
    with pytest.raises(UnsupportedClass):
        ev_fleet_fraction(ScenarioTable(), "s", 2035, RegionFilter(vclasses=frozenset({VehicleClass.RAIL})))


def test_fleet_fraction_empty_denominator():
    with pytest.raises(EmptyDenominator):
        ev_fleet_fraction(ScenarioTable(), "s", 2035, ROAD)


def test_fuel_mix_reproduces_2030_totals():
    table = ScenarioTable(
        energy=(
            EnergyRecord("nz_ccs_climate", 2030, "CA", VehicleClass.LDV, Fuel.REFINED_LIQUIDS, 4.70),
            EnergyRecord("nz_ccs_climate", 2030, "CA", VehicleClass.LDV, Fuel.ELECTRICITY, 0.26),
            EnergyRecord("nz_ccs_climate", 2030, "CA", VehicleClass.LDV, Fuel.HYDROGEN, 0.037),
            EnergyRecord("nz_ira_ccs_climate", 2030, "CA", VehicleClass.LDV, Fuel.REFINED_LIQUIDS, 4.53),
            EnergyRecord("nz_ira_ccs_climate", 2030, "CA", VehicleClass.LDV, Fuel.ELECTRICITY, 0.40),
            EnergyRecord("nz_ira_ccs_climate", 2030, "CA", VehicleClass.LDV, Fuel.HYDROGEN, 0.063),
        )
    )
    ccs = fuel_mix(table, "nz_ccs_climate", 2030, ALL)
    ira = fuel_mix(table, "nz_ira_ccs_climate", 2030, ALL)
    assert ccs[Fuel.REFINED_LIQUIDS] == pytest.approx(4.70)
    assert ira[Fuel.REFINED_LIQUIDS] == pytest.approx(4.53)
    assert ccs[Fuel.ELECTRICITY] == pytest.approx(0.26)
    assert ira[Fuel.ELECTRICITY] == pytest.approx(0.40)


def test_fuel_mix_empty_region_is_all_zero():
    table = energy_table([("CA", VehicleClass.LDV, Fuel.ELECTRICITY, 1.0)])
    mix = fuel_mix(table, "s", 2035, RegionFilter(states=frozenset({"WY"})))
    assert mix == {fuel: 0.0 for fuel in Fuel}


def test_per_capita_linear_scaling():
    table = ScenarioTable(
        energy=(EnergyRecord("s", 2035, "WY", VehicleClass.LDV, Fuel.ELECTRICITY, 0.25),),
        population=(PopulationRecord("WY", 2035, 5_000_000.0),),
    )
    per = fuel_mix_per_capita(table, "s", 2035, "WY")
    assert per[Fuel.ELECTRICITY] == pytest.approx(0.50, rel=1e-12)
    assert per[Fuel.HYDROGEN] == 0.0


def test_per_capita_missing_population():
    table = energy_table([("WY", VehicleClass.LDV, Fuel.ELECTRICITY, 0.25)])
    with pytest.raises(MissingPopulation):
        fuel_mix_per_capita(table, "s", 2035, "WY")


@given(
    st.floats(min_value=1e-3, max_value=10.0),
    st.floats(min_value=1e5, max_value=1e8),
    st.floats(min_value=0.1, max_value=10.0),
)
@settings(max_examples=50)
def test_per_capita_homogeneity(energy, persons, k):
    def build(e, p):
        return ScenarioTable(
            energy=(EnergyRecord("s", 2035, "WY", VehicleClass.LDV, Fuel.ELECTRICITY, e),),
            population=(PopulationRecord("WY", 2035, p),),
        )

    base = fuel_mix_per_capita(build(energy, persons), "s", 2035, "WY")[Fuel.ELECTRICITY]
    scaled_e = fuel_mix_per_capita(build(energy * k, persons), "s", 2035, "WY")[Fuel.ELECTRICITY]
    scaled_p = fuel_mix_per_capita(build(energy, persons * k), "s", 2035, "WY")[Fuel.ELECTRICITY]
    assert scaled_e == pytest.approx(k * base, rel=1e-9)
    assert scaled_p == pytest.approx(base / k, rel=1e-9)


def test_scenario_delta_reported_increases():
    assert scenario_delta(0.26, 0.40) == pytest.approx(0.5384615, rel=1e-5)
    assert scenario_delta(0.037, 0.063) == pytest.approx(0.7027027, rel=1e-5)
    assert scenario_delta(3.14, 3.14) == 0.0


def test_scenario_delta_zero_baseline():
    with pytest.raises(ZeroBaseline):
        scenario_delta(0.0, 1.0)


def test_region_filter_requires_vclasses():
    with pytest.raises(ValueError):
        RegionFilter(vclasses=frozenset())
