from __future__ import annotations

import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from voltpath.ingest import VehicleClass
from voltpath.sessions import (
    BadConfig,
    ChargingSession,
    FleetSpec,
    InfeasibleSession,
    LoadSegment,
    MobilityConfig,
    NoFeasibleWindow,
    RouteSpec,
    SampleCounters,
    SeededRng,
    Strategy,
    StrategyMix,
    TruncatedNormal,
    aggregate_segments,
    default_mobility_config,
    enroute_window,
    hours_in_month,
    minutes_in_month,
    profile,
    profile_delayed,
    profile_immediate,
    profile_min_power,
    sample_sessions,
    split_enroute,
)


def make_session(
    arrival=600.0,
    dwell_min=300.0,
    energy=10.0,
    power=7.4,
    strategy=Strategy.IMMEDIATE,
    vclass=VehicleClass.LDV,
):
    return ChargingSession(
        vclass=vclass,
        state="WA",
        arrival_min=arrival,
        departure_min=arrival + dwell_min,
        energy_kwh=energy,
        power_kw=power,
        strategy=strategy,
    )


def integrate_kwh(segments, resolution_min=0.01):
    """Independent quadrature oracle: midpoint rule on a fine grid."""
    total = 0.0
    for seg in segments:
        t = seg.start_min
        while t < seg.end_min:
            step = min(resolution_min, seg.end_min - t)
            total += seg.power_kw * step / 60.0
            t += step
    return total


# ---------------------------------------------------------------------------
# strategy profiles
# ---------------------------------------------------------------------------


def test_min_power_ten_kwh_five_hours_is_two_kw():
    s = make_session(dwell_min=300.0, energy=10.0, strategy=Strategy.MIN_POWER)
    (segment,) = profile_min_power(s)
    assert segment.power_kw == pytest.approx(2.0, rel=1e-12)
    assert segment.start_min == s.arrival_min
    assert segment.end_min == s.departure_min


def test_min_power_ten_hours_is_one_kw():
    s = make_session(dwell_min=600.0, energy=10.0, strategy=Strategy.MIN_POWER)
    (segment,) = profile_min_power(s)
    assert segment.power_kw == pytest.approx(1.0, rel=1e-12)


def test_immediate_duration_from_energy_over_power():
    s = make_session(dwell_min=300.0, energy=10.0, power=7.4)
    (segment,) = profile_immediate(s)
    assert segment.power_kw == 7.4
    assert segment.end_min - segment.start_min == pytest.approx(10.0 / 7.4 * 60.0, rel=1e-12)
    assert segment.start_min == s.arrival_min
    assert segment.end_min <= s.departure_min


def test_immediate_tiny_energy_scales_linearly():
    s = make_session(energy=0.0001, power=7.4)
    (segment,) = profile_immediate(s)
    assert segment.end_min - segment.start_min == pytest.approx(0.0001 / 7.4 * 60.0, rel=1e-12)


def test_boundary_energy_spans_full_dwell_and_matches_immediate():
    dwell = 120.0
    power = 11.0
    energy = power * dwell / 60.0
    imm = make_session(dwell_min=dwell, energy=energy, power=power)
    (seg_i,) = profile_immediate(imm)
    assert seg_i.end_min == pytest.approx(imm.departure_min, rel=1e-12)
    dly = make_session(dwell_min=dwell, energy=energy, power=power, strategy=Strategy.DELAYED)
    (seg_d,) = profile_delayed(dly)
    assert seg_d.start_min == pytest.approx(dly.arrival_min, rel=1e-12)
    assert seg_d.end_min == seg_d.end_min


def test_delayed_ends_at_departure():
    s = make_session(dwell_min=300.0, energy=10.0, power=7.4, strategy=Strategy.DELAYED)
    (segment,) = profile_delayed(s)
    assert segment.end_min == s.departure_min
    assert segment.power_kw == 7.4


session_params = st.tuples(
    st.floats(min_value=0.0, max_value=5000.0),      # arrival
    st.floats(min_value=1.0, max_value=1000.0),      # dwell minutes
    st.floats(min_value=3.7, max_value=500.0),       # power
    st.floats(min_value=0.01, max_value=1.0),        # energy as fraction of ceiling
)


@given(session_params)
@settings(max_examples=60)
def test_delayed_is_time_reversed_immediate(params):
    arrival, dwell, power, frac = params
    energy = frac * power * dwell / 60.0
    imm = make_session(arrival, dwell, energy, power, Strategy.IMMEDIATE)
    dly = make_session(arrival, dwell, energy, power, Strategy.DELAYED)
    (seg_i,) = profile_immediate(imm)
    (seg_d,) = profile_delayed(dly)
    # reflect the immediate segment about the dwell midpoint
    mid = (imm.arrival_min + imm.departure_min) / 2.0
    assert seg_d.start_min == pytest.approx(2 * mid - seg_i.end_min, rel=1e-9, abs=1e-9)
    assert seg_d.end_min == pytest.approx(2 * mid - seg_i.start_min, rel=1e-9, abs=1e-9)
    assert seg_d.power_kw == seg_i.power_kw


@given(session_params, st.sampled_from(Strategy))
@settings(max_examples=100)
def test_profile_integral_equals_energy_need(params, strategy):
    arrival, dwell, power, frac = params
    energy = frac * power * dwell / 60.0
    s = make_session(arrival, dwell, energy, power, strategy)
    segments = profile(s)
    exact = math.fsum(seg.energy_kwh for seg in segments)
    assert exact == pytest.approx(energy, rel=1e-9)


def test_profile_integral_quadrature_oracle():
    s = make_session(dwell_min=300.0, energy=10.0, strategy=Strategy.MIN_POWER)
    assert integrate_kwh(profile_min_power(s)) == pytest.approx(10.0, rel=1e-6)
    s2 = make_session(dwell_min=300.0, energy=10.0, power=7.4)
    assert integrate_kwh(profile_immediate(s2)) == pytest.approx(10.0, rel=1e-6)


@given(session_params)
@settings(max_examples=60)
def test_peak_ordering(params):
    arrival, dwell, power, frac = params
    energy = frac * power * dwell / 60.0 * 0.999  # strictly below the ceiling
    peak_min = max(seg.power_kw for seg in profile_min_power(
        make_session(arrival, dwell, energy, power, Strategy.MIN_POWER)))
    peak_imm = max(seg.power_kw for seg in profile_immediate(
        make_session(arrival, dwell, energy, power, Strategy.IMMEDIATE)))
    peak_dly = max(seg.power_kw for seg in profile_delayed(
        make_session(arrival, dwell, energy, power, Strategy.DELAYED)))
    assert peak_min < peak_imm
    assert peak_imm == peak_dly == power


def test_profile_rejects_wrong_strategy():
    s = make_session(strategy=Strategy.MIN_POWER)
    with pytest.raises(ValueError):
        profile_immediate(s)


def test_infeasible_session_rejected_at_construction():
    with pytest.raises(InfeasibleSession):
        make_session(dwell_min=60.0, energy=100.0, power=7.4)


# ---------------------------------------------------------------------------
# en-route charging
# ---------------------------------------------------------------------------


def test_enroute_window_forced_unique():
    route = RouteSpec(
        depot_departure_min=100.0,
        depot_arrival_min=700.0,
        start_buffer_min=300.0,
        end_buffer_min=299.0,
        enroute_energy_share=0.13,
    )
    rng = SeededRng(7).stream("window")
    assert enroute_window(route, rng) == (400, 401)


def test_enroute_window_infeasible():
    route = RouteSpec(100.0, 700.0, 300.0, 299.5)
    with pytest.raises(NoFeasibleWindow):
        enroute_window(route, SeededRng(7).stream("w"))


def test_enroute_window_containment_seeded_draws():
    route = RouteSpec(480.0, 1020.0, 45.0, 30.0, 0.13)
    rng = SeededRng(123).stream("containment")
    lo, hi = 480.0 + 45.0, 1020.0 - 30.0
    starts, ends = [], []
    for _ in range(10_000):
        start, end = enroute_window(route, rng)
        assert lo <= start < end <= hi
        starts.append(start)
        ends.append(end)
    assert min(starts) >= lo
    assert max(ends) <= hi
    # with 10k draws the edges should actually be reached
    assert min(starts) <= lo + 5
    assert max(ends) >= hi - 5


def test_enroute_window_zero_buffers_inside_route():
    route = RouteSpec(100.0, 400.0)
    rng = SeededRng(5).stream("zb")
    for _ in range(100):
        start, end = enroute_window(route, rng)
        assert 100.0 <= start < end <= 400.0


def test_split_share_zero_is_identity():
    s = make_session(vclass=VehicleClass.HDV, power=150.0, energy=100.0, dwell_min=600.0)
    route = RouteSpec(0.0, 600.0, 30.0, 30.0, enroute_energy_share=0.0)
    depot, road = split_enroute(s, route, SeededRng(1).stream("s"))
    assert depot == s
    assert road is None


def test_split_87_13():
    s = make_session(vclass=VehicleClass.HDV, power=150.0, energy=100.0, dwell_min=600.0)
    route = RouteSpec(0.0, 600.0, 30.0, 30.0, enroute_energy_share=0.13)
    depot, road = split_enroute(s, route, SeededRng(1).stream("s"))
    assert depot.energy_kwh == pytest.approx(87.0, rel=1e-12)
    assert road.energy_kwh == pytest.approx(13.0, rel=1e-12)
    assert depot.energy_kwh + road.energy_kwh == pytest.approx(100.0, rel=1e-15)


@given(
    st.floats(min_value=1.0, max_value=2000.0),
    st.floats(min_value=0.0, max_value=1.0),
    st.integers(min_value=0, max_value=2**31 - 1),
)
@settings(max_examples=80)
def test_split_conserves_energy(energy_frac, share, seed):
    power = 350.0
    dwell = 700.0
    energy = min(energy_frac, power * dwell / 60.0 * 0.9)
    s = make_session(vclass=VehicleClass.MDV, power=power, energy=energy, dwell_min=dwell)
    route = RouteSpec(0.0, 640.0, 20.0, 20.0, enroute_energy_share=share)
    depot, road = split_enroute(s, route, SeededRng(seed).stream("conserve"))
    total = math.fsum(c.energy_kwh for c in (depot, road) if c is not None)
    assert total == pytest.approx(s.energy_kwh, rel=1e-12)


def test_split_rejects_ldv():
    s = make_session(vclass=VehicleClass.LDV)
    with pytest.raises(ValueError):
        split_enroute(s, RouteSpec(0.0, 400.0, 10.0, 10.0), SeededRng(1).stream("x"))


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------


def test_aggregate_half_hour_overlap_splits_evenly():
    bins = aggregate_segments([LoadSegment(30.0, 90.0, 2.0)], month=1)
    assert bins[0] == pytest.approx(1.0)
    assert bins[1] == pytest.approx(1.0)
    assert bins[2:].sum() == 0.0


def test_aggregate_empty_is_zero():
    bins = aggregate_segments([], month=2)
    assert bins.shape == (hours_in_month(2),)
    assert not bins.any()


def test_aggregate_out_of_range_rejected():
    from voltpath.sessions import SegmentOutOfRange

    with pytest.raises(SegmentOutOfRange):
        aggregate_segments([LoadSegment(-10.0, 20.0, 1.0)], month=1)
    with pytest.raises(SegmentOutOfRange):
        aggregate_segments([LoadSegment(0.0, minutes_in_month(1) + 1.0, 1.0)], month=1)


segments_strategy = st.lists(
    st.tuples(
        st.floats(min_value=0.0, max_value=minutes_in_month(1) - 1.0),
        st.floats(min_value=0.001, max_value=3000.0),
        st.floats(min_value=0.1, max_value=500.0),
    ),
    min_size=0,
    max_size=40,
)


@given(segments_strategy)
@settings(max_examples=100)
def test_aggregate_conserves_total_energy(raw):
    month_end = float(minutes_in_month(1))
    segments = [
        LoadSegment(start, min(start + length, month_end), power) for start, length, power in raw
    ]
    bins = aggregate_segments(segments, month=1)
    # closed-form oracle: sum of power x duration, independent of binning
    expected = math.fsum(s.power_kw * (s.end_min - s.start_min) / 60.0 for s in segments)
    assert math.fsum(bins) == pytest.approx(expected, rel=1e-9, abs=1e-9)
    assert (bins >= 0).all()


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def test_sample_zero_count_empty():
    cfg = default_mobility_config()
    rng = SeededRng(0).stream("empty")
    mix = cfg.strategy_mix_for("s", 2035)
    assert sample_sessions(cfg, FleetSpec("WA", VehicleClass.LDV, 0), 1, mix, rng) == []


def test_sample_strategy_frequencies_match_2035_mix():
    cfg = default_mobility_config()
    mix = cfg.strategy_mix_for("nz_ccs_climate", 2035)
    assert mix.weight(Strategy.IMMEDIATE) == 0.8
    assert mix.weight(Strategy.MIN_POWER) == 0.2
    rng = SeededRng(20350807).stream("nz_ccs_climate", 2035, "WA", VehicleClass.LDV, 6)
    sessions = sample_sessions(cfg, FleetSpec("WA", VehicleClass.LDV, 1000), 6, mix, rng)
    share = sum(1 for s in sessions if s.strategy is Strategy.IMMEDIATE) / len(sessions)
    assert abs(share - 0.8) <= 0.03
    share_min = sum(1 for s in sessions if s.strategy is Strategy.MIN_POWER) / len(sessions)
    assert abs(share_min - 0.2) <= 0.03


def test_sample_deterministic_for_same_seed_and_path():
    cfg = default_mobility_config()
    mix = cfg.strategy_mix_for("s", 2050)
    spec = FleetSpec("CA", VehicleClass.HDV, 500)
    first = sample_sessions(cfg, spec, 3, mix, SeededRng(9).stream("s", 2050, "CA", "hdv", 3))
    second = sample_sessions(cfg, spec, 3, mix, SeededRng(9).stream("s", 2050, "CA", "hdv", 3))
    assert first == second
    other_path = sample_sessions(cfg, spec, 3, mix, SeededRng(9).stream("s", 2050, "CA", "hdv", 4))
    assert first != other_path


def test_sample_sessions_satisfy_invariants():
    cfg = default_mobility_config()
    mix = StrategyMix({Strategy.IMMEDIATE: 0.5, Strategy.MIN_POWER: 0.3, Strategy.DELAYED: 0.2})
    month = 2
    month_end = minutes_in_month(month)
    counters = SampleCounters()
    sessions = sample_sessions(
        cfg,
        FleetSpec("CO", VehicleClass.MDV, 2000),
        month,
        mix,
        SeededRng(11).stream("t", 2040, "CO", "mdv", month),
        utc_shift_min=420.0,
        counters=counters,
    )
    assert len(sessions) == 2000
    levels = {kw for kw, _ in cfg.charger_mix[VehicleClass.MDV]}
    for s in sessions:
        assert 0.0 <= s.arrival_min < s.departure_min <= month_end
        assert s.power_kw in levels
        assert s.energy_kwh <= s.power_kw * s.dwell_hours * (1 + 1e-9)
    assert counters.clipped_total >= 0


def test_sample_rejects_unnormalized_mix():
    with pytest.raises(BadConfig):
        StrategyMix({Strategy.IMMEDIATE: 0.5, Strategy.MIN_POWER: 0.2})


def test_strategy_aliases():
    assert Strategy.parse("min_delay") is Strategy.IMMEDIATE
    assert Strategy.parse("load_level") is Strategy.MIN_POWER
    assert Strategy.parse("delayed") is Strategy.DELAYED


def test_strategy_mix_interpolation_between_anchors():
    cfg = default_mobility_config()
    mix_2040 = cfg.strategy_mix_for("any", 2040)
    assert mix_2040.weight(Strategy.IMMEDIATE) == pytest.approx(0.8 - 0.5 / 3.0)
    assert cfg.strategy_mix_for("any", 2020).weight(Strategy.IMMEDIATE) == 0.8
    assert cfg.strategy_mix_for("any", 2080).weight(Strategy.MIN_POWER) == 0.7


def test_truncated_normal_bounds():
    dist = TruncatedNormal(mean=100.0, sd=50.0, lo=10.0, hi=120.0)
    u = np.linspace(0.0, 1.0 - 1e-12, 1000)
    x = dist.ppf(u)
    assert (x >= 10.0).all() and (x <= 120.0).all()
    with pytest.raises(BadConfig):
        TruncatedNormal(mean=0.0, sd=1.0, lo=5.0, hi=5.0)
