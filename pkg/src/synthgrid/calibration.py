"""Static-data calibration: capacity scaling to external targets, fuel-cost
calibration, emissions curves, geothermal ratings, and spur-line matching."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, replace

from .errors import (
    DomainMismatch,
    EmptyProfile,
    IoError,
    NoGeneratorsForTarget,
    ParseError,
    SpurTopologyError,
    ZeroGroupCapacity,
)
from .grid_model import CostCurve, EmissionsCurve, Generator, Network


@dataclass(frozen=True)
class CalibrationTarget:
    state: str
    fuel: str
    target_capacity: float  # MW
    target_avg_price: float  # currency/MWh
    interconnection: str | None = None  # splits the (state, fuel) group when set


def load_targets(path: str) -> list[CalibrationTarget]:
    """targets.csv: state,fuel,interconnection_optional,target_capacity_mw,target_avg_price"""
    if not os.path.exists(path):
        raise IoError(f"missing targets file: {path}")
    header = ["state", "fuel", "interconnection_optional",
              "target_capacity_mw", "target_avg_price"]
    targets = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got != header:
            raise ParseError(path, 1, "-", f"header {got!r} != expected {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                targets.append(CalibrationTarget(
                    state=row[0], fuel=row[1],
                    interconnection=row[2] or None,
                    target_capacity=float(row[3]),
                    target_avg_price=float(row[4]),
                ))
            except (ValueError, IndexError) as exc:
                raise ParseError(path, lineno, "-", str(exc))
    return targets


def _group_key(n: Network, g: Generator, split_interconnection: bool):
    if split_interconnection:
        bus = n.bus_map()[g.bus]
        return (g.state, n.bus_interconnection(bus), g.fuel)
    return (g.state, g.fuel)


def _grouped(n: Network, targets):
    """Maps each target to its generator index list; interconnection-qualified
    targets partition the (state, fuel) group."""
    bus_map = n.bus_map()
    out = []
    for t in targets:
        idx = []
        for i, g in enumerate(n.generators):
            if g.state != t.state or g.fuel != t.fuel:
                continue
            if t.interconnection is not None:
                inter = n.bus_interconnection(bus_map[g.bus])
                if inter != t.interconnection:
                    continue
            idx.append(i)
        out.append((t, idx))
    return out


def scale_generators_to_targets(n: Network,
                                targets: list[CalibrationTarget]) -> Network:
    """Per (state[, interconnection], fuel) group, scale every generator's
    p_max to hit the capacity target; p_min, ramp, no-load cost, and curve
    breakpoints scale by the same factor to preserve per-unit behavior."""
    out = n.copy()
    for t, idx in _grouped(out, targets):
        if not idx:
            if t.target_capacity > 0:
                raise NoGeneratorsForTarget(t.state, t.fuel)
            continue
        current = sum(out.generators[i].p_max for i in idx)
        if current == 0:
            if t.target_capacity > 0:
                raise ZeroGroupCapacity(f"({t.state}, {t.fuel})")
            continue
        f = t.target_capacity / current
        for i in idx:
            g = out.generators[i]
            out.generators[i] = replace(
                g,
                p_min=g.p_min * f,
                p_max=g.p_max * f,
                ramp_limit=g.ramp_limit * f,
                no_load_cost=g.no_load_cost * f,
                cost_curve=g.cost_curve.scale_power(f),
            )
    return out


def group_capacity_weighted_price(gens: list[Generator]) -> float:
    cap = sum(g.p_max for g in gens)
    if cap == 0:
        return 0.0
    return sum(g.p_max * g.cost_curve.mean_marginal_cost() for g in gens) / cap


def calibrate_fuel_costs(n: Network,
                         targets: list[CalibrationTarget]) -> Network:
    """Scale each targeted group's marginal costs so the capacity-weighted
    average price hits the target. Zero-priced groups (the fuel-oil case) get
    their curves replaced by a flat curve at the target price."""
    out = n.copy()
    for t, idx in _grouped(out, targets):
        if not idx:
            continue
        gens = [out.generators[i] for i in idx]
        current = group_capacity_weighted_price(gens)
        if current == 0.0:
            if t.target_avg_price <= 0:
                continue
            for i in idx:
                g = out.generators[i]
                flat = CostCurve([(b, t.target_avg_price)
                                  for b, _ in g.cost_curve.points])
                out.generators[i] = replace(g, cost_curve=flat)
            continue
        g_factor = t.target_avg_price / current
        for i in idx:
            g = out.generators[i]
            out.generators[i] = replace(
                g, cost_curve=g.cost_curve.scale_price(g_factor))
    return out


def derive_emissions_curve(g: Generator,
                           heat_rate_curve: list[tuple[float, float]],
                           co2_rate: float) -> EmissionsCurve:
    """emissions(p) = co2_rate × heat_rate(p) on the same breakpoints."""
    if co2_rate < 0:
        raise DomainMismatch("co2_rate must be ≥ 0")
    if not heat_rate_curve:
        raise DomainMismatch("empty heat-rate curve")
    lo = heat_rate_curve[0][0]
    hi = heat_rate_curve[-1][0]
    if lo > g.p_min + 1e-9 or hi < g.p_max - 1e-9:
        raise DomainMismatch(
            f"heat-rate curve [{lo}, {hi}] does not cover "
            f"[{g.p_min}, {g.p_max}] for gen {g.id}")
    return EmissionsCurve(
        co2_rate=co2_rate,
        points=[(p, co2_rate * h) for p, h in heat_rate_curve],
    )


def set_geothermal_ratings(annual_generation) -> tuple[float, float]:
    """Rating rule for baseload geothermal: p_max is the annual mean output
    and p_min is 95% of p_max."""
    values = getattr(annual_generation, "values", annual_generation)
    if len(values) == 0:
        raise EmptyProfile("geothermal generation profile is empty")
    p_max = float(sum(values)) / len(values)
    return p_max, 0.95 * p_max


def _spur_generator_side(n: Network, branch) -> set[int]:
    """Buses isolated by removing the spur, on the generator-only side."""
    adj: dict[int, list[int]] = {b.id: [] for b in n.buses}
    for br in n.branches:
        if br.id == branch.id:
            continue
        adj[br.from_bus].append(br.to_bus)
        adj[br.to_bus].append(br.from_bus)

    def component(root):
        comp = {root}
        stack = [root]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in comp:
                    comp.add(v)
                    stack.append(v)
        return comp

    from_side = component(branch.from_bus)
    if branch.to_bus in from_side:
        raise SpurTopologyError(f"branch {branch.id} flagged is_spur is not a bridge")
    to_side = component(branch.to_bus)

    gen_buses = {g.bus for g in n.generators}
    demand_buses = {b.id for b in n.buses if b.demand_participation}
    for side in (from_side, to_side):
        if side & gen_buses and not side & demand_buses:
            return side
    raise SpurTopologyError(
        f"branch {branch.id}: neither side is a generator-only subnetwork")


def match_spur_capacity(n: Network) -> Network:
    """Raise every spur branch's capacity to cover the generation behind it;
    never shrinks."""
    out = n.copy()
    for i, br in enumerate(out.branches):
        if not br.is_spur:
            continue
        side = _spur_generator_side(out, br)
        behind = sum(g.p_max for g in out.generators if g.bus in side)
        if behind > br.capacity:
            out.branches[i] = replace(br, capacity=behind)
    return out
