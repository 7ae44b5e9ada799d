"""Static network data model, CSV case format, and structural validation.

A "case" is a directory of five CSV files (bus, branch, dcline, gen, zone)
described in the README. Parsing is strict: headers must match exactly and
malformed rows are reported with their line number.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, replace

from .errors import IntegrityError, IoError, ParseError, UnknownInterconnection

FUELS = (
    "coal", "natural_gas", "fuel_oil", "nuclear", "hydro",
    "wind", "solar", "geothermal", "other",
)
BRANCH_KINDS = ("line", "transformer", "transformer_winding")
VRE_FUELS = ("wind", "solar", "hydro")
MUST_RUN_FUELS = ("geothermal", "nuclear")

DEFAULT_BASE_MVA = 100.0


@dataclass
class CostCurve:
    """Convex piecewise-linear cost: point i's marginal cost applies on the
    segment ending at its breakpoint (and below the first breakpoint)."""

    points: list[tuple[float, float]]  # (breakpoint_mw, marginal_cost)

    def mean_marginal_cost(self) -> float:
        """Capacity-averaged slope over the curve span."""
        pts = self.points
        if len(pts) < 2 or pts[-1][0] <= pts[0][0]:
            return pts[-1][1]
        total = 0.0
        for (b0, _), (b1, mc) in zip(pts, pts[1:]):
            total += mc * (b1 - b0)
        return total / (pts[-1][0] - pts[0][0])

    def scale_power(self, f: float) -> "CostCurve":
        return CostCurve([(b * f, mc) for b, mc in self.points])

    def scale_price(self, g: float) -> "CostCurve":
        return CostCurve([(b, mc * g) for b, mc in self.points])

    def dispatch_segments(self, lo: float = 0.0) -> list[tuple[float, float]]:
        """(width, marginal_cost) segments covering [lo, last breakpoint]."""
        segs = []
        prev = lo
        for i, (b, mc) in enumerate(self.points):
            if b <= prev:
                continue
            segs.append((b - prev, mc))
            prev = b
        return segs

    def is_convex(self) -> bool:
        bs = [b for b, _ in self.points]
        mcs = [mc for _, mc in self.points]
        return (all(b1 > b0 for b0, b1 in zip(bs, bs[1:]))
                and all(m1 >= m0 for m0, m1 in zip(mcs, mcs[1:])))


@dataclass
class EmissionsCurve:
    co2_rate: float  # tons CO2 per MMBtu
    points: list[tuple[float, float]]  # (mw, tons_co2_per_h)


@dataclass
class Bus:
    id: int
    zone_id: int
    state: str
    base_kv: float
    population_weight: float
    demand_participation: bool


@dataclass
class Branch:
    id: int
    from_bus: int
    to_bus: int
    reactance: float  # per unit
    capacity: float  # MW; 0 means unlimited
    kind: str
    is_spur: bool


@dataclass
class DcLine:
    id: int
    from_bus: int
    to_bus: int
    capacity: float


@dataclass
class Generator:
    id: int
    bus: int
    fuel: str
    state: str
    p_min: float
    p_max: float
    ramp_limit: float  # MW per hour
    no_load_cost: float
    cost_curve: CostCurve
    co2_rate: float = 0.0
    heat_rate_curve: list[tuple[float, float]] | None = None

    @property
    def must_run(self) -> bool:
        return self.fuel in MUST_RUN_FUELS


@dataclass
class Zone:
    zone_id: int
    name: str
    interconnection: str


@dataclass
class Violation:
    entity: str
    rule: str

    def __str__(self):
        return f"{self.entity}: {self.rule}"


@dataclass
class Network:
    """Immutable-by-convention static system; mutating operations copy."""

    buses: list[Bus]
    branches: list[Branch]
    dc_lines: list[DcLine]
    generators: list[Generator]
    zones: list[Zone]
    base_mva: float = DEFAULT_BASE_MVA

    def bus_map(self) -> dict[int, Bus]:
        return {b.id: b for b in self.buses}

    def zone_map(self) -> dict[int, Zone]:
        return {z.zone_id: z for z in self.zones}

    def interconnections(self) -> list[str]:
        seen = []
        for z in self.zones:
            if z.interconnection not in seen:
                seen.append(z.interconnection)
        return seen

    def bus_interconnection(self, bus: Bus) -> str | None:
        z = self.zone_map().get(bus.zone_id)
        return z.interconnection if z is not None else None

    def generator_state_fuel(self, g: Generator) -> tuple[str, str]:
        return (g.state, g.fuel)

    def copy(self) -> "Network":
        return Network(
            buses=[replace(b) for b in self.buses],
            branches=[replace(b) for b in self.branches],
            dc_lines=[replace(d) for d in self.dc_lines],
            generators=[
                replace(
                    g,
                    cost_curve=CostCurve(list(g.cost_curve.points)),
                    heat_rate_curve=(list(g.heat_rate_curve)
                                     if g.heat_rate_curve is not None else None),
                )
                for g in self.generators
            ],
            zones=[replace(z) for z in self.zones],
            base_mva=self.base_mva,
        )


# --- parsing ---------------------------------------------------------------

_SCHEMAS = {
    "bus.csv": ["id", "zone_id", "state", "base_kv", "population_weight",
                "demand_participation"],
    "branch.csv": ["id", "from", "to", "reactance_pu", "capacity_mw", "kind",
                   "is_spur"],
    "dcline.csv": ["id", "from", "to", "capacity_mw"],
    "gen.csv": ["id", "bus", "fuel", "state", "p_min_mw", "p_max_mw",
                "ramp_mw_per_h", "no_load_cost", "curve_json", "co2_rate"],
    "zone.csv": ["zone_id", "name", "interconnection"],
}


def _read_rows(case_dir: str, name: str):
    path = os.path.join(case_dir, name)
    if not os.path.exists(path):
        raise IoError(f"missing case file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "-", "empty file, header row mandatory")
        if header != _SCHEMAS[name]:
            raise ParseError(path, 1, "-",
                             f"header {header!r} != expected {_SCHEMAS[name]!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(path, lineno, "-",
                                 f"expected {len(header)} fields, got {len(row)}")
            rows.append((lineno, dict(zip(header, row))))
    return path, rows


def _to_int(path, lineno, col, raw):
    try:
        return int(raw)
    except ValueError:
        raise ParseError(path, lineno, col, f"not an integer: {raw!r}")


def _to_float(path, lineno, col, raw):
    try:
        v = float(raw)
    except ValueError:
        raise ParseError(path, lineno, col, f"not a number: {raw!r}")
    if not math.isfinite(v):
        raise ParseError(path, lineno, col, f"not finite: {raw!r}")
    return v


def _to_flag(path, lineno, col, raw):
    if raw in ("1", "true", "True"):
        return True
    if raw in ("0", "false", "False"):
        return False
    raise ParseError(path, lineno, col, f"not a flag: {raw!r}")


def _parse_curve_json(path, lineno, raw):
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(path, lineno, "curve_json", f"bad JSON: {exc}")
    if not isinstance(obj, dict) or "cost" not in obj:
        raise ParseError(path, lineno, "curve_json", "missing 'cost' key")
    try:
        cost = [(float(b), float(mc)) for b, mc in obj["cost"]]
        heat = None
        if obj.get("heat_rate") is not None:
            heat = [(float(p), float(h)) for p, h in obj["heat_rate"]]
    except (TypeError, ValueError) as exc:
        raise ParseError(path, lineno, "curve_json", f"bad point list: {exc}")
    return CostCurve(cost), heat


def load_network(case_dir: str) -> Network:
    """Load a case directory; raises on missing files, malformed rows, and
    dangling references."""
    path, rows = _read_rows(case_dir, "zone.csv")
    zones = []
    for lineno, r in rows:
        zones.append(Zone(
            zone_id=_to_int(path, lineno, "zone_id", r["zone_id"]),
            name=r["name"],
            interconnection=r["interconnection"],
        ))
    _check_unique(zones, "zone_id", "zone")

    path, rows = _read_rows(case_dir, "bus.csv")
    buses = []
    for lineno, r in rows:
        buses.append(Bus(
            id=_to_int(path, lineno, "id", r["id"]),
            zone_id=_to_int(path, lineno, "zone_id", r["zone_id"]),
            state=r["state"],
            base_kv=_to_float(path, lineno, "base_kv", r["base_kv"]),
            population_weight=_to_float(path, lineno, "population_weight",
                                        r["population_weight"]),
            demand_participation=_to_flag(path, lineno, "demand_participation",
                                          r["demand_participation"]),
        ))
    _check_unique(buses, "id", "bus")
    bus_ids = {b.id for b in buses}

    path, rows = _read_rows(case_dir, "branch.csv")
    branches = []
    for lineno, r in rows:
        kind = r["kind"]
        if kind not in BRANCH_KINDS:
            raise ParseError(path, lineno, "kind", f"unknown kind {kind!r}")
        br = Branch(
            id=_to_int(path, lineno, "id", r["id"]),
            from_bus=_to_int(path, lineno, "from", r["from"]),
            to_bus=_to_int(path, lineno, "to", r["to"]),
            reactance=_to_float(path, lineno, "reactance_pu", r["reactance_pu"]),
            capacity=_to_float(path, lineno, "capacity_mw", r["capacity_mw"]),
            kind=kind,
            is_spur=_to_flag(path, lineno, "is_spur", r["is_spur"]),
        )
        for end in (br.from_bus, br.to_bus):
            if end not in bus_ids:
                raise IntegrityError(f"branch {br.id} → bus {end}")
        branches.append(br)
    _check_unique(branches, "id", "branch")

    path, rows = _read_rows(case_dir, "dcline.csv")
    dc_lines = []
    for lineno, r in rows:
        dc = DcLine(
            id=_to_int(path, lineno, "id", r["id"]),
            from_bus=_to_int(path, lineno, "from", r["from"]),
            to_bus=_to_int(path, lineno, "to", r["to"]),
            capacity=_to_float(path, lineno, "capacity_mw", r["capacity_mw"]),
        )
        for end in (dc.from_bus, dc.to_bus):
            if end not in bus_ids:
                raise IntegrityError(f"dcline {dc.id} → bus {end}")
        dc_lines.append(dc)
    _check_unique(dc_lines, "id", "dcline")

    path, rows = _read_rows(case_dir, "gen.csv")
    generators = []
    for lineno, r in rows:
        fuel = r["fuel"]
        if fuel not in FUELS:
            raise ParseError(path, lineno, "fuel", f"unknown fuel {fuel!r}")
        curve, heat = _parse_curve_json(path, lineno, r["curve_json"])
        g = Generator(
            id=_to_int(path, lineno, "id", r["id"]),
            bus=_to_int(path, lineno, "bus", r["bus"]),
            fuel=fuel,
            state=r["state"],
            p_min=_to_float(path, lineno, "p_min_mw", r["p_min_mw"]),
            p_max=_to_float(path, lineno, "p_max_mw", r["p_max_mw"]),
            ramp_limit=_to_float(path, lineno, "ramp_mw_per_h", r["ramp_mw_per_h"]),
            no_load_cost=_to_float(path, lineno, "no_load_cost", r["no_load_cost"]),
            cost_curve=curve,
            co2_rate=_to_float(path, lineno, "co2_rate", r["co2_rate"]),
            heat_rate_curve=heat,
        )
        if g.bus not in bus_ids:
            raise IntegrityError(f"gen {g.id} → bus {g.bus}")
        generators.append(g)
    _check_unique(generators, "id", "gen")

    return Network(buses=buses, branches=branches, dc_lines=dc_lines,
                   generators=generators, zones=zones)


def _check_unique(items, attr, label):
    seen = set()
    for it in items:
        key = getattr(it, attr)
        if key in seen:
            raise IntegrityError(f"duplicate {label} id {key}")
        seen.add(key)


# --- writing ----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def save_network(n: Network, case_dir: str) -> None:
    """Write the symmetric CSV case; round-trips through load_network."""
    os.makedirs(case_dir, exist_ok=True)

    def write(name, rows):
        with open(os.path.join(case_dir, name), "w", newline="",
                  encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(_SCHEMAS[name])
            for row in rows:
                w.writerow([_fmt(v) for v in row])

    write("zone.csv", [(z.zone_id, z.name, z.interconnection) for z in n.zones])
    write("bus.csv", [(b.id, b.zone_id, b.state, b.base_kv, b.population_weight,
                       b.demand_participation) for b in n.buses])
    write("branch.csv", [(b.id, b.from_bus, b.to_bus, b.reactance, b.capacity,
                          b.kind, b.is_spur) for b in n.branches])
    write("dcline.csv", [(d.id, d.from_bus, d.to_bus, d.capacity)
                         for d in n.dc_lines])
    gen_rows = []
    for g in n.generators:
        curve = {"cost": [[b, mc] for b, mc in g.cost_curve.points]}
        if g.heat_rate_curve is not None:
            curve["heat_rate"] = [[p, h] for p, h in g.heat_rate_curve]
        gen_rows.append((g.id, g.bus, g.fuel, g.state, g.p_min, g.p_max,
                         g.ramp_limit, g.no_load_cost,
                         json.dumps(curve, separators=(",", ":")), g.co2_rate))
    write("gen.csv", gen_rows)


# --- validation ---------------------------------------------------------------

def validate_network(n: Network) -> list[Violation]:
    """Checks every structural invariant; an empty list means the network is
    safe for all downstream modules."""
    out = []
    bus_ids = set()
    zmap = n.zone_map()
    for b in n.buses:
        if b.id in bus_ids:
            out.append(Violation(f"bus {b.id}", "ids unique"))
        bus_ids.add(b.id)
        if b.base_kv <= 0:
            out.append(Violation(f"bus {b.id}", "base_kv > 0"))
        if b.population_weight < 0:
            out.append(Violation(f"bus {b.id}", "population_weight ≥ 0"))
        if b.demand_participation and b.zone_id not in zmap:
            out.append(Violation(f"bus {b.id}", "zone_id in zone table"))

    for br in n.branches:
        if br.from_bus == br.to_bus:
            out.append(Violation(f"branch {br.id}", "from_bus ≠ to_bus"))
        if br.reactance <= 0:
            out.append(Violation(f"branch {br.id}", "reactance > 0"))
        if br.capacity < 0:
            out.append(Violation(f"branch {br.id}", "capacity ≥ 0"))
        for end in (br.from_bus, br.to_bus):
            if end not in bus_ids:
                out.append(Violation(f"branch {br.id}", "endpoints exist"))

    for dc in n.dc_lines:
        if dc.capacity < 0:
            out.append(Violation(f"dcline {dc.id}", "capacity ≥ 0"))
        for end in (dc.from_bus, dc.to_bus):
            if end not in bus_ids:
                out.append(Violation(f"dcline {dc.id}", "endpoints exist"))

    for g in n.generators:
        if not (0 <= g.p_min <= g.p_max):
            out.append(Violation(f"gen {g.id}", "p_min ≤ p_max"))
        if g.ramp_limit < 0:
            out.append(Violation(f"gen {g.id}", "ramp_limit ≥ 0"))
        if not g.cost_curve.is_convex():
            out.append(Violation(f"gen {g.id}", "cost_curve convex"))
        if g.bus not in bus_ids:
            out.append(Violation(f"gen {g.id}", "bus exists"))

    for inter in n.interconnections():
        try:
            comps = connected_components(n, inter)
        except UnknownInterconnection:
            continue
        if len(comps) > 1:
            out.append(Violation(f"interconnection {inter}", "connected"))
    return out


def connected_components(n: Network, interconnection: str) -> list[set[int]]:
    """Partition of the interconnection's buses under AC-branch adjacency."""
    if interconnection not in n.interconnections():
        raise UnknownInterconnection(interconnection)
    zmap = n.zone_map()
    members = {b.id for b in n.buses
               if b.zone_id in zmap
               and zmap[b.zone_id].interconnection == interconnection}
    adj: dict[int, list[int]] = {b: [] for b in members}
    for br in n.branches:
        if br.from_bus in members and br.to_bus in members:
            adj[br.from_bus].append(br.to_bus)
            adj[br.to_bus].append(br.from_bus)
    comps = []
    unseen = set(members)
    while unseen:
        root = unseen.pop()
        comp = {root}
        stack = [root]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in comp:
                    comp.add(v)
                    stack.append(v)
        unseen -= comp
        comps.append(comp)
    return comps
