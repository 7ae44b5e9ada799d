"""Command-line pipeline: build → profiles → simulate → upgrade → report.

Stages communicate only through files under the output directory, so each
command can be re-run independently. Config is a single TOML file; the
SYNTHGRID_ environment prefix and command-line flags override it.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import calibration, grid_model, report, timeseries, upgrade
from .errors import ConfigError, IoError, MissingProfile, SynthGridError
from .grid_model import load_network, save_network, validate_network
from .harness import (HarnessOptions, build_inputs, plan_windows,
                      run_rolling_horizon, write_energy_log, write_hourly_log,
                      write_window_log)
from .mpdcopf import MpdcopfOptions
from .timeseries import (default_power_curve, detect_anomalies,
                         disaggregate_demand, impute_missing_demand,
                         impute_wind_uv, interpolate_anomalies, read_hydro_energy,
                         read_irradiance, read_power_curve, read_profiles,
                         read_tracking_mix, read_wind_uv, read_zone_demand,
                         solar_power, wind_profile, write_profiles,
                         DEFAULT_TRACKING_MIX, TrackingMix, hydro_profile)


class RunConfig:
    """Validated run configuration with flag/env/config precedence."""

    def __init__(self, config_path: str, args):
        if not os.path.exists(config_path):
            raise IoError(f"missing config file: {config_path}")
        with open(config_path, "rb") as fh:
            raw = tomllib.load(fh)
        self.base_dir = os.path.dirname(os.path.abspath(config_path))
        self.raw = raw

        self.seed = int(self._pick(args.seed, "SYNTHGRID_SEED",
                                   raw.get("seed", 0)))
        self.out = self._pick(args.out, "SYNTHGRID_OUT", raw.get("out", "out"))
        if not os.path.isabs(self.out):
            self.out = os.path.join(self.base_dir, self.out)

        sim = raw.get("simulate", {})
        self.window_hours = int(self._pick(args.window_hours,
                                           "SYNTHGRID_WINDOW_HOURS",
                                           sim.get("window_hours", 144)))
        self.windows = args.windows  # optional cap on window count
        self.retry_cap = int(sim.get("retry_cap", 20))
        self.mpdcopf = MpdcopfOptions(
            soft_limits=False,
            penalty=float(sim.get("penalty", 2000.0)),
            load_shed_cost=float(sim.get("load_shed_cost", 10000.0)),
            allow_shed=bool(sim.get("allow_shed", True)),
        )

        upg = raw.get("upgrade", {})
        self.upgrade_mode = upg.get("mode", "soft")
        if self.upgrade_mode not in ("soft", "step"):
            raise ConfigError(f"upgrade.mode must be 'soft' or 'step', "
                              f"got {self.upgrade_mode!r}")
        self.policy = upgrade.UpgradePolicy(
            shadow_price_threshold=float(upg.get("threshold", 25.0)),
            step_size=float(upg.get("step_mw", 100.0)),
            max_iterations=int(upg.get("max_iterations", 50)),
            target=upg.get("target", "eliminate_shed"),
            lmp_floor=float(upg.get("lmp_floor", 5.0)),
        )

        rep = raw.get("report", {})
        self.revision_cap = float(rep.get("cap", 0.05))
        self.revision_beta = float(rep.get("beta", 0.5))

    @staticmethod
    def _pick(flag, env_name, config_value):
        if flag is not None:
            return flag
        if env_name in os.environ:
            return os.environ[env_name]
        return config_value

    def path(self, key: str, required: bool = True) -> str | None:
        paths = self.raw.get("paths", {})
        if key not in paths:
            if required:
                raise ConfigError(f"config is missing paths.{key}")
            return None
        p = paths[key]
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)

    def out_path(self, *parts) -> str:
        os.makedirs(self.out, exist_ok=True)
        return os.path.join(self.out, *parts)

    def case_dir(self) -> str:
        """Latest case in the stage chain: upgraded > calibrated > raw."""
        for name in ("case_upgraded", "case_calibrated"):
            candidate = os.path.join(self.out, name)
            if os.path.isdir(candidate):
                return candidate
        return self.path("case")

    def harness_options(self) -> HarnessOptions:
        return HarnessOptions(retry_cap=self.retry_cap, mpdcopf=self.mpdcopf)


def cmd_build(cfg: RunConfig) -> None:
    n = load_network(cfg.path("case"))
    violations = validate_network(n)
    if violations:
        raise SynthGridError(
            "input case is invalid: " + "; ".join(str(v) for v in violations))
    targets = calibration.load_targets(cfg.path("targets"))
    for t in targets:
        gens = [g for g in n.generators
                if g.state == t.state and g.fuel == t.fuel]
        current = sum(g.p_max for g in gens)
        factor = t.target_capacity / current if current else float("nan")
        print(f"group ({t.state}, {t.fuel}): capacity {current:.3f} -> "
              f"{t.target_capacity:.3f} MW (factor {factor:.6f})")
    n = calibration.scale_generators_to_targets(n, targets)
    n = calibration.calibrate_fuel_costs(n, targets)
    n = calibration.match_spur_capacity(n)
    out_dir = cfg.out_path("case_calibrated")
    save_network(n, out_dir)
    print(f"calibrated case written to {out_dir}")


def cmd_profiles(cfg: RunConfig) -> None:
    case = cfg.case_dir()
    n = load_network(case)
    imputed = 0
    flagged = 0

    # demand: clean each zone series, then split across participating buses
    zone_profiles = read_zone_demand(cfg.path("demand_zone"))
    demand_profiles = {}
    for zone_id, profile in sorted(zone_profiles.items()):
        n_missing = int(np.isnan(profile.values).sum())
        if n_missing:
            profile = impute_missing_demand(profile)
            imputed += n_missing
        anomalies = detect_anomalies(profile)
        if anomalies:
            profile = interpolate_anomalies(profile, anomalies)
            flagged += len(anomalies)
        buses = [(b.id, b.population_weight) for b in n.buses
                 if b.zone_id == zone_id and b.demand_participation]
        if buses:
            demand_profiles.update(disaggregate_demand(profile, buses))
    write_profiles(cfg.out_path("profile_demand.csv"), demand_profiles)

    curve_path = cfg.path("power_curve", required=False)
    curve = read_power_curve(curve_path) if curve_path else default_power_curve()

    wind_path = cfg.path("wind_uv", required=False)
    wind_profiles = {}
    if wind_path:
        samples = impute_wind_uv(read_wind_uv(wind_path), cfg.seed)
        by_location: dict[str, list] = {}
        for s in samples:
            by_location.setdefault(s.location, []).append(s)
        for g in n.generators:
            if g.fuel != "wind":
                continue
            if str(g.id) not in by_location:
                raise MissingProfile(f"wind gen {g.id} (no wind_uv location)")
            wind_profiles[g.id] = wind_profile(by_location[str(g.id)], curve,
                                               g.p_max)
    write_profiles(cfg.out_path("profile_wind.csv"), wind_profiles)

    mix_path = cfg.path("tracking_mix", required=False)
    mixes = read_tracking_mix(mix_path) if mix_path else {
        name: TrackingMix(*w) for name, w in DEFAULT_TRACKING_MIX.items()}
    irr_path = cfg.path("irradiance", required=False)
    solar_profiles = {}
    if irr_path:
        irradiance = read_irradiance(irr_path)
        bus_map = n.bus_map()
        for g in n.generators:
            if g.fuel != "solar":
                continue
            if g.id not in irradiance:
                raise MissingProfile(f"solar gen {g.id} (no irradiance)")
            inter = n.bus_interconnection(bus_map[g.bus]) or ""
            mix = mixes.get(inter) or next(iter(mixes.values()))
            solar_profiles[g.id] = solar_power(irradiance[g.id], mix, g.p_max)
    write_profiles(cfg.out_path("profile_solar.csv"), solar_profiles)

    hydro_path = cfg.path("hydro_energy", required=False)
    hydro_profiles = {}
    if hydro_path:
        energies = read_hydro_energy(hydro_path)
        # the generic shape reuses the profile schema; any entity id works
        shape_path = cfg.path("hydro_shape", required=False)
        shape = next(iter(read_profiles(shape_path).values())) if shape_path else None
        for g in n.generators:
            if g.fuel != "hydro":
                continue
            if g.id not in energies:
                raise MissingProfile(f"hydro gen {g.id} (no monthly energy)")
            if shape is None:
                base = _flat_year_shape(demand_profiles)
                hydro_profiles[g.id] = hydro_profile(base, energies[g.id],
                                                     g.p_max, flat=True)
            else:
                hydro_profiles[g.id] = hydro_profile(shape, energies[g.id],
                                                     g.p_max)
    write_profiles(cfg.out_path("profile_hydro.csv"), hydro_profiles)

    print(f"imputed: {imputed}")
    print(f"flagged: {flagged}")
    print(f"profiles written to {cfg.out}")


def _flat_year_shape(demand_profiles):
    any_profile = next(iter(demand_profiles.values()))
    return any_profile.with_values(np.ones(len(any_profile)))


def _load_stage_inputs(cfg: RunConfig):
    case = cfg.case_dir()
    n = load_network(case)
    demand_path = cfg.out_path("profile_demand.csv")
    if not os.path.exists(demand_path):
        raise MissingProfile("profile_demand.csv (run the profiles stage first)")
    demand_profiles = read_profiles(demand_path)
    vre_profiles = {}
    for kind in ("wind", "solar", "hydro"):
        path = cfg.out_path(f"profile_{kind}.csv")
        if os.path.exists(path):
            vre_profiles.update(read_profiles(path))
    horizon = min(len(p) for p in demand_profiles.values())
    demand, availability = build_inputs(n, demand_profiles, vre_profiles,
                                        horizon)
    plan = plan_windows(horizon, cfg.window_hours)
    if cfg.windows is not None:
        plan.offsets = plan.offsets[:int(cfg.windows)]
        plan.total_hours = min(plan.total_hours,
                               plan.offsets[-1] + plan.window_hours)
        demand = demand[:, :plan.total_hours]
        availability = availability[:, :plan.total_hours]
    return n, demand, availability, plan


def cmd_simulate(cfg: RunConfig) -> None:
    n, demand, availability, plan = _load_stage_inputs(cfg)
    log = run_rolling_horizon(n, demand, availability, plan,
                              cfg.harness_options())
    write_window_log(log, cfg.out_path("log_windows.csv"))
    write_hourly_log(log, cfg.out_path("log_hours.csv"))
    write_energy_log(log, n, cfg.out_path("energy_by_state_fuel.csv"))
    retries = sum(rec.retries for rec in log.windows)
    print(f"simulated {plan.count} windows over {plan.total_hours} h "
          f"({retries} retries)")


def cmd_upgrade(cfg: RunConfig) -> None:
    n, demand, availability, plan = _load_stage_inputs(cfg)
    if cfg.upgrade_mode == "step":
        net, records = upgrade.step_upgrade(n, demand, availability, plan,
                                            cfg.policy, cfg.harness_options())
    else:
        requirements = upgrade.size_upgrades_soft(
            n, demand, availability, plan, cfg.mpdcopf.penalty,
            cfg.harness_options())
        net = upgrade.apply_upgrades(n, requirements)
        old = {br.id: br.capacity for br in n.branches}
        records = [upgrade.UpgradeRecord(bid, old[bid], old[bid] + extra, 1,
                                         extra)
                   for bid, extra in requirements]
    upgrade.write_upgrades_csv(records, cfg.out_path("upgrades.csv"))
    save_network(net, cfg.out_path("case_upgraded"))
    print(f"upgraded {len(records)} branches")


def cmd_report(cfg: RunConfig) -> None:
    case = cfg.case_dir()
    n = load_network(case)
    energy_path = cfg.out_path("energy_by_state_fuel.csv")
    if not os.path.exists(energy_path):
        raise MissingProfile("energy_by_state_fuel.csv (run simulate first)")
    sim = {}
    with open(energy_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for r in reader:
            if r:
                sim[(r[0], r[1])] = float(r[2]) / report.MWH_PER_TWH
    hist = report.load_historical(cfg.path("historical"))
    cmp = report.compare(sim, hist)
    report.emit_report(cmp, cfg.out_path("comparison.csv"),
                       cfg.out_path("comparison.svg"))
    revised = report.revise_costs(n, cmp, cfg.revision_cap, cfg.revision_beta)
    save_network(revised, cfg.out_path("case_revised"))
    print(f"euclidean error {cmp.euclidean:.6f} TWh, "
          f"sum-abs error {cmp.sum_abs:.6f} TWh")


COMMANDS = {
    "build": cmd_build,
    "profiles": cmd_profiles,
    "simulate": cmd_simulate,
    "upgrade": cmd_upgrade,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="synthgrid",
        description="Synthetic power-network calibration, profile synthesis, "
                    "and rolling-horizon DC-OPF validation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--windows", type=int, default=None,
                       help="limit the number of simulated windows")
        p.add_argument("--window-hours", dest="window_hours", type=int,
                       default=None)
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig(args.config, args)
        COMMANDS[args.command](cfg)
    except SynthGridError as exc:
        print(f"error in stage '{args.command}': {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
