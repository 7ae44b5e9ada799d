"""Hourly profile construction: demand disaggregation and cleaning, wind/solar
conversion, and hydro shaping. All timestamps are UTC; missing values are NaN."""

from __future__ import annotations

import csv
import math
import os
import zlib
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import (
    BadMix,
    EmptyProfile,
    InfeasibleMonth,
    IoError,
    NoDonorData,
    NoValidNeighbor,
    ParseError,
    TooShort,
    ZeroTotalWeight,
)

HOUR = timedelta(hours=1)

# Default PV array gains for the simplified irradiance-to-power model.
DEFAULT_PV_GAINS = {"fixed": 0.85, "single_axis": 0.95, "dual_axis": 1.00}

# Default tracking mixes per interconnection (fixed / single-axis / dual-axis
# shares; tracking split between axes is an assumption, the fixed share is not).
DEFAULT_TRACKING_MIX = {
    "eastern": (0.67, 0.24, 0.09),
    "western": (0.24, 0.56, 0.20),
    "ercot": (0.08, 0.68, 0.24),
}


def parse_ts(raw: str) -> datetime:
    return datetime.strptime(raw, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def format_ts(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class HourlyProfile:
    start: datetime  # UTC, hour-aligned
    values: np.ndarray  # float64; NaN marks missing
    unit: str = "MW"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.size == 0:
            raise EmptyProfile("profile must have length > 0")

    def __len__(self):
        return len(self.values)

    def timestamp(self, i: int) -> datetime:
        return self.start + i * HOUR

    def with_values(self, values) -> "HourlyProfile":
        return HourlyProfile(self.start, np.asarray(values, dtype=np.float64),
                             self.unit)


@dataclass
class WindSample:
    location: str
    timestamp: datetime
    u: float
    v: float
    missing: bool = False


@dataclass
class PowerCurve:
    """Fraction-of-rated-power vs wind speed; zero below cut_in and at or
    above cut_out."""

    speeds: np.ndarray
    fractions: np.ndarray
    cut_in: float
    cut_out: float

    def __post_init__(self):
        self.speeds = np.asarray(self.speeds, dtype=np.float64)
        self.fractions = np.asarray(self.fractions, dtype=np.float64)
        if np.any(np.diff(self.speeds) <= 0):
            raise ValueError("power-curve speeds must be strictly increasing")
        if np.any(self.fractions < 0) or np.any(self.fractions > 1):
            raise ValueError("power-curve fractions must lie in [0, 1]")


def default_power_curve() -> PowerCurve:
    """Configurable default turbine curve: cut-in 3 m/s, rated plateau from
    14 m/s, cut-out 25 m/s."""
    speeds = [3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 25]
    fracs = [0.0, 0.05, 0.12, 0.22, 0.36, 0.52, 0.70, 0.84, 0.93, 0.975,
             0.995, 1.0, 1.0]
    return PowerCurve(np.array(speeds, float), np.array(fracs, float),
                      cut_in=3.0, cut_out=25.0)


@dataclass
class TrackingMix:
    fixed: float
    single_axis: float
    dual_axis: float

    def __post_init__(self):
        w = (self.fixed, self.single_axis, self.dual_axis)
        if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
            raise BadMix(f"tracking mix {w} is not on the simplex")


# --- demand -------------------------------------------------------------------

def disaggregate_demand(zone_profile: HourlyProfile,
                        buses: list[tuple[int, float]]) -> dict[int, HourlyProfile]:
    """Split a zone profile across buses proportionally to population weight;
    hourly bus values re-add to the zone total."""
    weights = np.array([w for _, w in buses], dtype=np.float64)
    if np.any(weights < 0):
        raise ZeroTotalWeight("negative population weight")
    total = weights.sum()
    if total <= 0:
        raise ZeroTotalWeight("zone population weights sum to zero")
    return {
        bus_id: zone_profile.with_values(zone_profile.values * (w / total))
        for (bus_id, _), w in zip(buses, weights)
    }


def _day_info(p: HourlyProfile, calendar=None):
    """Per-hour (day_index, hour_of_day, is_weekend)."""
    n = len(p)
    first_midnight = p.start.replace(minute=0, second=0, microsecond=0)
    base = first_midnight - first_midnight.hour * HOUR
    day_idx = np.empty(n, dtype=np.int64)
    hod = np.empty(n, dtype=np.int64)
    weekend = np.empty(n, dtype=bool)
    for i in range(n):
        ts = p.start + i * HOUR
        d = (ts - base) // timedelta(days=1)
        day_idx[i] = d
        hod[i] = ts.hour
        if calendar is not None:
            weekend[i] = calendar[d] == "weekend"
        else:
            weekend[i] = ts.weekday() >= 5
    return base, day_idx, hod, weekend


def impute_missing_demand(p: HourlyProfile, calendar=None) -> HourlyProfile:
    """Fill NaN demand hours. Weekday holes take the mean of the same hour on
    the nearest non-missing weekdays before and after; weekend holes copy from
    the other day of that weekend, or average the same hour on adjacent
    weekends when the whole weekend is out."""
    base, day_idx, hod, weekend = _day_info(p, calendar)
    orig = p.values
    out = orig.copy()
    n = len(p)

    # (day, hour) -> index lookup over the profile span
    index_of = {(int(day_idx[i]), int(hod[i])): i for i in range(n)}
    n_days = int(day_idx.max()) + 1
    day_is_weekend = np.zeros(n_days, dtype=bool)
    for i in range(n):
        day_is_weekend[day_idx[i]] = weekend[i]

    def value_at(day, hour):
        i = index_of.get((day, hour))
        if i is None:
            return None
        v = orig[i]
        return None if math.isnan(v) else float(v)

    def nearest(day, hour, want_weekend, step):
        d = day + step
        while 0 <= d < n_days:
            if day_is_weekend[d] == want_weekend:
                v = value_at(d, hour)
                if v is not None:
                    return v
            d += step
        return None

    for i in range(n):
        if not math.isnan(orig[i]):
            continue
        d, h = int(day_idx[i]), int(hod[i])
        if not weekend[i]:
            donors = [v for v in (nearest(d, h, False, -1), nearest(d, h, False, +1))
                      if v is not None]
            if not donors:
                raise NoDonorData(f"no weekday donors for day {d} hour {h}")
            out[i] = sum(donors) / len(donors)
        else:
            # the other day of the same two-day weekend
            other = d - 1 if d > 0 and day_is_weekend[d - 1] else d + 1
            v = (value_at(other, h)
                 if 0 <= other < n_days and day_is_weekend[other] else None)
            if v is not None:
                out[i] = v
                continue
            # whole weekend out: nearest weekend days with data on either side
            donors = [v for v in (nearest(d, h, True, -1), nearest(d, h, True, +1))
                      if v is not None]
            if not donors:
                raise NoDonorData(f"no weekend donors for day {d} hour {h}")
            out[i] = sum(donors) / len(donors)
    return p.with_values(out)


def detect_anomalies(p: HourlyProfile, k: float = 5.0) -> list[int]:
    """Hours whose ramp magnitude exceeds mean + k·std of all ramp magnitudes;
    the later hour of the ramp is flagged."""
    if len(p) < 3:
        raise TooShort("anomaly detection needs ≥ 3 hours")
    ramps = np.abs(np.diff(p.values))
    mean = float(ramps.mean())
    std = float(ramps.std())
    threshold = mean if std == 0.0 else mean + k * std
    if math.isnan(threshold):
        threshold = mean
    return [int(i) + 1 for i in np.nonzero(ramps > threshold)[0]]


def interpolate_anomalies(p: HourlyProfile, flagged: list[int]) -> HourlyProfile:
    """Replace flagged hours by linear interpolation between the nearest
    unflagged neighbors; edge runs take the nearest unflagged value."""
    if not flagged:
        return p.with_values(p.values.copy())
    n = len(p)
    bad = np.zeros(n, dtype=bool)
    for i in flagged:
        if not 0 <= i < n:
            raise NoValidNeighbor(f"flagged index {i} out of range")
        bad[i] = True
    good = np.nonzero(~bad)[0]
    if good.size == 0:
        raise NoValidNeighbor("every hour is flagged")
    out = p.values.copy()
    out[bad] = np.interp(np.nonzero(bad)[0], good, p.values[good])
    return p.with_values(out)


# --- wind ---------------------------------------------------------------------

def _key_rng(seed: int, location: str, month: int, hour: int):
    loc_hash = zlib.crc32(location.encode("utf-8"))
    return np.random.default_rng(
        np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, loc_hash, month, hour]))


def impute_wind_uv(samples: list[WindSample], seed: int) -> list[WindSample]:
    """Fill missing U/V draws uniformly inside the extrema of donors sharing
    (location, month, hour-of-day). Deterministic given the seed and
    independent of processing order across keys."""
    donors: dict[tuple, list[tuple[float, float]]] = {}
    for s in samples:
        if s.missing:
            continue
        key = (s.location, s.timestamp.month, s.timestamp.hour)
        donors.setdefault(key, []).append((s.u, s.v))

    missing_by_key: dict[tuple, list[int]] = {}
    for i, s in enumerate(samples):
        if s.missing:
            key = (s.location, s.timestamp.month, s.timestamp.hour)
            missing_by_key.setdefault(key, []).append(i)

    out = list(samples)
    for key, idxs in missing_by_key.items():
        if key not in donors:
            raise NoDonorData(f"no donors for (location, month, hour) = {key}")
        us = [u for u, _ in donors[key]]
        vs = [v for _, v in donors[key]]
        rng = _key_rng(seed, *key)
        for i in sorted(idxs, key=lambda j: samples[j].timestamp):
            u = rng.uniform(min(us), max(us))
            v = rng.uniform(min(vs), max(vs))
            out[i] = WindSample(samples[i].location, samples[i].timestamp,
                                float(u), float(v), missing=False)
    return out


def wind_power(u: float, v: float, curve: PowerCurve, p_max: float) -> float:
    """Convert a U/V wind sample to MW via the turbine power curve."""
    speed = math.hypot(u, v)
    if speed < curve.cut_in or speed >= curve.cut_out:
        return 0.0
    frac = float(np.interp(speed, curve.speeds, curve.fractions))
    return p_max * frac


def wind_profile(samples: list[WindSample], curve: PowerCurve,
                 p_max: float) -> HourlyProfile:
    """Hourly MW profile from a single location's completed sample series."""
    ordered = sorted(samples, key=lambda s: s.timestamp)
    if not ordered:
        raise EmptyProfile("no wind samples")
    values = np.array([wind_power(s.u, s.v, curve, p_max) for s in ordered])
    return HourlyProfile(ordered[0].timestamp, values)


# --- solar --------------------------------------------------------------------

def solar_power(irradiance_profile: HourlyProfile, mix: TrackingMix,
                p_max: float, gains: dict[str, float] | None = None) -> HourlyProfile:
    """Simplified PV model: plane-of-array fraction (irradiance / 1000 W/m²,
    clipped to [0, 1.1]) through per-array-type gains, mix-weighted, clipped
    to [0, p_max]."""
    gains = gains or DEFAULT_PV_GAINS
    x = np.clip(irradiance_profile.values / 1000.0, 0.0, 1.1)
    gain = (mix.fixed * gains["fixed"]
            + mix.single_axis * gains["single_axis"]
            + mix.dual_axis * gains["dual_axis"])
    power = np.clip(p_max * gain * x, 0.0, p_max)
    return HourlyProfile(irradiance_profile.start, power)


# --- hydro --------------------------------------------------------------------

def _month_slices(p: HourlyProfile):
    """Contiguous index ranges per (year, month)."""
    slices: dict[tuple[int, int], list[int]] = {}
    for i in range(len(p)):
        ts = p.start + i * HOUR
        slices.setdefault((ts.year, ts.month), []).append(i)
    return slices


def _energy_for(monthly_energy, key):
    if key in monthly_energy:
        return monthly_energy[key]
    if key[1] in monthly_energy:
        return monthly_energy[key[1]]
    raise InfeasibleMonth(f"no monthly energy for {key}")


def hydro_profile(shape: HourlyProfile, monthly_energy, p_max: float,
                  flat: bool = False) -> HourlyProfile:
    """Scale the shape so each month's energy matches its total. Months whose
    scaled peak exceeds p_max fall back to the flat monthly-average profile;
    flat=True uses the flat profile for every month."""
    out = np.empty(len(shape))
    for key, idx in _month_slices(shape).items():
        idx = np.asarray(idx)
        energy = float(_energy_for(monthly_energy, key))
        hours = len(idx)
        flat_value = energy / hours
        use_flat = flat
        if not use_flat:
            month_shape = shape.values[idx]
            total = float(month_shape.sum())
            if total <= 0:
                use_flat = True
            else:
                scaled = month_shape * (energy / total)
                if np.any(scaled > p_max * (1 + 1e-9)):
                    use_flat = True
                else:
                    out[idx] = scaled
        if use_flat:
            if flat_value > p_max * (1 + 1e-9):
                raise InfeasibleMonth(
                    f"month {key}: flat value {flat_value:.3f} MW exceeds "
                    f"p_max {p_max:.3f} MW")
            out[idx] = flat_value
    return shape.with_values(out)


# --- CSV interfaces -------------------------------------------------------------

def _open_csv(path, header):
    if not os.path.exists(path):
        raise IoError(f"missing input file: {path}")
    fh = open(path, newline="", encoding="utf-8")
    reader = csv.reader(fh)
    got = next(reader, None)
    if got != header:
        fh.close()
        raise ParseError(path, 1, "-", f"header {got!r} != expected {header!r}")
    return fh, reader


def _series_from_rows(rows, path):
    """rows: (entity, timestamp, value-or-NaN) sorted per entity; returns
    {entity: HourlyProfile} enforcing hourly continuity."""
    grouped: dict = {}
    for entity, ts, value in rows:
        grouped.setdefault(entity, []).append((ts, value))
    out = {}
    for entity, pairs in grouped.items():
        pairs.sort(key=lambda p: p[0])
        start = pairs[0][0]
        for i, (ts, _) in enumerate(pairs):
            if ts != start + i * HOUR:
                raise ParseError(path, 0, "timestamp_utc",
                                 f"entity {entity}: gap at {format_ts(ts)}")
        out[entity] = HourlyProfile(start, np.array([v for _, v in pairs]))
    return out


def read_zone_demand(path: str) -> dict[int, HourlyProfile]:
    fh, reader = _open_csv(path, ["zone_id", "timestamp_utc", "mw"])
    with fh:
        rows = [(int(r[0]), parse_ts(r[1]), float(r[2]) if r[2] != "" else math.nan)
                for r in reader if r]
    return _series_from_rows(rows, path)


def read_irradiance(path: str) -> dict[int, HourlyProfile]:
    fh, reader = _open_csv(path, ["plant_id", "timestamp_utc", "w_per_m2"])
    with fh:
        rows = [(int(r[0]), parse_ts(r[1]), float(r[2])) for r in reader if r]
    return _series_from_rows(rows, path)


def read_wind_uv(path: str) -> list[WindSample]:
    fh, reader = _open_csv(path, ["location", "timestamp_utc", "u", "v"])
    samples = []
    with fh:
        for r in reader:
            if not r:
                continue
            missing = r[2] == "" or r[3] == ""
            samples.append(WindSample(
                location=r[0], timestamp=parse_ts(r[1]),
                u=float(r[2]) if r[2] != "" else math.nan,
                v=float(r[3]) if r[3] != "" else math.nan,
                missing=missing))
    return samples


def read_hydro_energy(path: str) -> dict[int, dict[int, float]]:
    fh, reader = _open_csv(path, ["plant_id", "month", "mwh"])
    out: dict[int, dict[int, float]] = {}
    with fh:
        for r in reader:
            if not r:
                continue
            out.setdefault(int(r[0]), {})[int(r[1])] = float(r[2])
    return out


def read_power_curve(path: str) -> PowerCurve:
    fh, reader = _open_csv(path, ["speed_ms", "fraction"])
    with fh:
        pts = [(float(r[0]), float(r[1])) for r in reader if r]
    if len(pts) < 2:
        raise ParseError(path, 0, "-", "power curve needs ≥ 2 points")
    speeds = np.array([s for s, _ in pts])
    fracs = np.array([f for _, f in pts])
    return PowerCurve(speeds, fracs, cut_in=float(speeds[0]),
                      cut_out=float(speeds[-1]))


def read_tracking_mix(path: str) -> dict[str, TrackingMix]:
    fh, reader = _open_csv(path, ["interconnection", "fixed", "single", "dual"])
    with fh:
        return {r[0]: TrackingMix(float(r[1]), float(r[2]), float(r[3]))
                for r in reader if r}


def write_profiles(path: str, profiles: dict) -> None:
    """profile_<kind>.csv writer: entity_id, timestamp_utc, mw."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["entity_id", "timestamp_utc", "mw"])
        for entity in sorted(profiles):
            p = profiles[entity]
            for i, v in enumerate(p.values):
                w.writerow([entity, format_ts(p.timestamp(i)), repr(float(v))])


def read_profiles(path: str) -> dict[int, HourlyProfile]:
    fh, reader = _open_csv(path, ["entity_id", "timestamp_utc", "mw"])
    with fh:
        rows = [(int(r[0]), parse_ts(r[1]), float(r[2])) for r in reader if r]
    return _series_from_rows(rows, path)
