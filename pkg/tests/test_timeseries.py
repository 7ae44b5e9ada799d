"""Demand cleaning, wind/solar/hydro conversion, and profile CSV round-trips."""

import math
from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from synthgrid.errors import (BadMix, InfeasibleMonth, NoDonorData, TooShort,
                              ZeroTotalWeight)
from synthgrid.timeseries import (HourlyProfile, PowerCurve, TrackingMix,
                                  WindSample, default_power_curve,
                                  detect_anomalies, disaggregate_demand,
                                  hydro_profile, impute_missing_demand,
                                  impute_wind_uv, interpolate_anomalies,
                                  read_profiles, solar_power, wind_power,
                                  write_profiles)

UTC = timezone.utc
MON = datetime(2024, 1, 1, 0, tzinfo=UTC)  # a Monday
SAT = datetime(2024, 1, 6, 0, tzinfo=UTC)


def profile(values, start=MON):
    return HourlyProfile(start, np.array(values, dtype=float))


# --- disaggregation ---------------------------------------------------------

def test_disaggregation_conserves_totals():
    zone = profile(np.linspace(50, 150, 48))
    parts = disaggregate_demand(zone, [(1, 3.0), (2, 1.0), (3, 0.0)])
    total = sum(p.values for p in parts.values())
    assert np.allclose(total, zone.values, atol=1e-9)
    assert np.allclose(parts[1].values, zone.values * 0.75)
    assert np.all(parts[3].values == 0.0)


def test_disaggregation_zero_weights_raise():
    zone = profile([1.0, 2.0])
    with pytest.raises(ZeroTotalWeight):
        disaggregate_demand(zone, [(1, 0.0), (2, 0.0)])
    with pytest.raises(ZeroTotalWeight):
        disaggregate_demand(zone, [(1, -1.0), (2, 2.0)])


@given(st.lists(st.floats(0.01, 100.0), min_size=1, max_size=6))
def test_disaggregation_sums_property(weights):
    zone = profile(np.arange(1.0, 25.0))
    parts = disaggregate_demand(zone, list(enumerate(weights)))
    total = sum(p.values for p in parts.values())
    assert np.allclose(total, zone.values, rtol=1e-12, atol=1e-9)


# --- imputation ---------------------------------------------------------------

def test_weekday_hole_takes_neighbor_mean():
    # 3 weekdays, hour 5 of the middle day missing
    values = np.tile(np.arange(24.0), 3) + np.repeat([0.0, 100.0, 200.0], 24)
    values[24 + 5] = np.nan
    out = impute_missing_demand(profile(values))
    assert out.values[24 + 5] == pytest.approx((5.0 + 205.0) / 2)
    # everything else untouched
    mask = np.ones(72, bool)
    mask[24 + 5] = False
    assert np.array_equal(out.values[mask], values[mask])


def test_weekend_hole_copies_paired_day():
    # Sat + Sun; Sunday hour 3 missing -> copied from Saturday hour 3
    values = np.concatenate([np.full(24, 80.0), np.full(24, 90.0)])
    values[24 + 3] = np.nan
    out = impute_missing_demand(profile(values, start=SAT))
    assert out.values[24 + 3] == 80.0


def test_whole_weekend_out_uses_adjacent_weekends():
    # 16 days starting Monday: weekends at days 5-6 and 12-13
    n_days = 16
    values = np.zeros(n_days * 24)
    for d in range(n_days):
        base = 200.0 if d % 7 in (5, 6) else 100.0
        values[d * 24:(d + 1) * 24] = base + np.arange(24.0)
    # knock out the entire first weekend, with distinct future weekend values
    values[5 * 24:7 * 24] = np.nan
    values[12 * 24:14 * 24] += 50.0
    out = impute_missing_demand(profile(values))
    # only donors are the second weekend's matching days
    assert out.values[5 * 24 + 7] == pytest.approx(250.0 + 7.0)
    assert out.values[6 * 24 + 11] == pytest.approx(250.0 + 11.0)


def test_imputation_without_donors_raises():
    values = np.full(72, np.nan)
    values[0] = 10.0  # hour 0 has data, hour 5 never does
    with pytest.raises(NoDonorData):
        impute_missing_demand(profile(values))


# --- anomaly detection -----------------------------------------------------------

def test_detector_flags_later_hour_of_spike():
    values = np.sin(np.linspace(0, 8 * np.pi, 168)) * 10 + 100
    values[90:] += 400.0  # sustained level shift: one huge ramp at hour 90
    flagged = detect_anomalies(profile(values))
    assert flagged == [90]


def test_detector_silent_on_smooth_profile():
    values = np.sin(np.linspace(0, 8 * np.pi, 168)) * 10 + 100
    assert detect_anomalies(profile(values)) == []


def test_detector_handles_constant_profile_and_short_input():
    assert detect_anomalies(profile(np.full(24, 5.0))) == []
    with pytest.raises(TooShort):
        detect_anomalies(profile([1.0, 2.0]))


def test_interpolation_replaces_flagged_hours():
    values = np.arange(10, dtype=float)
    values[4] = 999.0
    out = interpolate_anomalies(profile(values), [4])
    assert out.values[4] == pytest.approx(4.0)  # midpoint of 3 and 5
    assert np.array_equal(np.delete(out.values, 4), np.delete(values, 4))
    # edge run takes the nearest unflagged value
    out = interpolate_anomalies(profile(values), [0])
    assert out.values[0] == values[1]


# --- wind ----------------------------------------------------------------------

def make_samples():
    samples = []
    for day in range(4):
        for hour in (6, 18):
            ts = datetime(2024, 3, 1 + day, hour, tzinfo=UTC)
            samples.append(WindSample("siteA", ts, 2.0 + day, -1.0 - day))
    # one missing draw at a (month=3, hour=6) slot
    samples.append(WindSample("siteA", datetime(2024, 3, 9, 6, tzinfo=UTC),
                              math.nan, math.nan, missing=True))
    return samples


def test_wind_imputation_within_donor_extrema_and_deterministic():
    samples = make_samples()
    out1 = impute_wind_uv(samples, seed=42)
    out2 = impute_wind_uv(samples, seed=42)
    filled1 = [s for s in out1 if s.timestamp.day == 9][0]
    filled2 = [s for s in out2 if s.timestamp.day == 9][0]
    assert (filled1.u, filled1.v) == (filled2.u, filled2.v)
    assert 2.0 <= filled1.u <= 5.0
    assert -4.0 <= filled1.v <= -1.0
    out3 = impute_wind_uv(samples, seed=43)
    filled3 = [s for s in out3 if s.timestamp.day == 9][0]
    assert (filled1.u, filled1.v) != (filled3.u, filled3.v)


def test_wind_imputation_no_donors_raises():
    lonely = [WindSample("siteB", datetime(2024, 5, 1, 3, tzinfo=UTC),
                         math.nan, math.nan, missing=True)]
    with pytest.raises(NoDonorData):
        impute_wind_uv(lonely, seed=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**32))
def test_wind_imputation_bounds_property(seed):
    out = impute_wind_uv(make_samples(), seed=seed)
    filled = [s for s in out if s.timestamp.day == 9][0]
    assert 2.0 <= filled.u <= 5.0
    assert -4.0 <= filled.v <= -1.0
    assert not filled.missing


def test_wind_power_through_curve():
    curve = default_power_curve()
    # a 3-4-5 triangle: hypot(3, 4) = 5 m/s -> 12% of rated
    assert wind_power(3.0, 4.0, curve, 200.0) == pytest.approx(24.0)
    assert wind_power(1.0, 1.0, curve, 200.0) == 0.0  # below cut-in
    assert wind_power(25.0, 0.0, curve, 200.0) == 0.0  # at cut-out
    assert wind_power(0.0, 24.9, curve, 200.0) == pytest.approx(200.0)
    assert wind_power(10.0, 10.0, curve, 200.0) == pytest.approx(200.0)  # rated


def test_power_curve_validation():
    with pytest.raises(ValueError):
        PowerCurve(np.array([3.0, 3.0]), np.array([0.0, 1.0]), 3.0, 25.0)
    with pytest.raises(ValueError):
        PowerCurve(np.array([3.0, 5.0]), np.array([0.0, 1.5]), 3.0, 25.0)


# --- solar -------------------------------------------------------------------------

def test_solar_power_model():
    irr = profile([0.0, 500.0, 1000.0, 1200.0])
    mix = TrackingMix(0.5, 0.3, 0.2)
    gain = 0.5 * 0.85 + 0.3 * 0.95 + 0.2 * 1.0
    out = solar_power(irr, mix, p_max=100.0)
    assert out.values[0] == 0.0
    assert out.values[1] == pytest.approx(100.0 * gain * 0.5)
    assert out.values[2] == pytest.approx(100.0 * gain)
    # irradiance clipped at 1.1 suns, output clipped at p_max
    assert out.values[3] == pytest.approx(min(100.0 * gain * 1.1, 100.0))
    assert np.all(out.values <= 100.0)


def test_tracking_mix_must_be_simplex():
    with pytest.raises(BadMix):
        TrackingMix(0.5, 0.3, 0.3)
    with pytest.raises(BadMix):
        TrackingMix(-0.1, 0.6, 0.5)


# --- hydro --------------------------------------------------------------------------

def test_hydro_scaling_preserves_monthly_energy():
    hours = 31 * 24
    shape = profile(1.0 + 0.5 * np.sin(np.linspace(0, 12 * np.pi, hours)))
    out = hydro_profile(shape, {1: 5000.0}, p_max=50.0)
    assert out.values.sum() == pytest.approx(5000.0, rel=1e-12)
    # shape preserved up to one scalar per month
    ratio = out.values / shape.values
    assert np.allclose(ratio, ratio[0])


def test_hydro_fallback_to_flat_when_peak_exceeds_pmax():
    hours = 31 * 24
    values = np.full(hours, 0.1)
    values[100] = 1000.0  # sharp peak forces the scaled series above p_max
    out = hydro_profile(profile(values), {1: 3000.0}, p_max=20.0)
    flat = 3000.0 / hours
    assert np.allclose(out.values, flat)
    assert out.values.sum() == pytest.approx(3000.0, rel=1e-12)


def test_hydro_infeasible_month_raises():
    with pytest.raises(InfeasibleMonth):
        hydro_profile(profile(np.ones(31 * 24)), {1: 1e9}, p_max=5.0)
    with pytest.raises(InfeasibleMonth):
        hydro_profile(profile(np.ones(31 * 24)), {2: 10.0}, p_max=5.0)


def test_hydro_spans_multiple_months():
    hours = (31 + 29) * 24  # Jan + Feb 2024
    shape = profile(np.ones(hours))
    out = hydro_profile(shape, {1: 744.0, 2: 1392.0}, p_max=5.0)
    assert out.values[:31 * 24].sum() == pytest.approx(744.0)
    assert out.values[31 * 24:].sum() == pytest.approx(1392.0)


# --- CSV round trip --------------------------------------------------------------------

def test_profile_csv_round_trip(tmp_path):
    path = str(tmp_path / "profile_demand.csv")
    original = {1: profile([1.5, 2.25, 3.125]), 7: profile(np.arange(5.0))}
    write_profiles(path, original)
    back = read_profiles(path)
    assert set(back) == {1, 7}
    for k in original:
        assert back[k].start == original[k].start
        assert np.array_equal(back[k].values, original[k].values)
