"""Multi-period DC optimal power flow as a linear program.

Builds the LP (piecewise-linear dispatch cost, angle-based flows, ramp
coupling, optional soft branch limits and load shed), solves it with the
bounded-variable simplex in lp.py, and exposes primal dispatch plus duals:
bus balance prices (LMPs) and branch-limit shadow prices."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotOptimal, UnboundedCost
from .grid_model import Network
from .lp import BIG, solve_lp

THETA_BOUND = 1e3  # rad; slack bound, never binding in sane cases
BINDING_TOL = 1e-6


@dataclass
class MpdcopfOptions:
    soft_limits: bool = False
    penalty: float = 2000.0  # currency/MWh on branch-limit violations
    load_shed_cost: float = 10000.0
    allow_shed: bool = True


@dataclass
class MpdcopfProblem:
    network: Network
    T: int
    demand: np.ndarray  # (B, T)
    availability: np.ndarray  # (G, T)
    options: MpdcopfOptions
    initial_dispatch: np.ndarray | None  # (G,)
    # index bookkeeping
    bus_ids: list[int]
    gen_ids: list[int]
    branch_ids: list[int]
    dcline_ids: list[int]
    # LP data
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    var_names: list[str]
    row_names: list[str]
    row_class: list[str]
    balance_row: np.ndarray  # (B, T) -> row index
    seg_vars: list[list[list[int]]]  # [g][t] -> segment var indices
    theta_var: np.ndarray  # (B, T)
    flow_var: np.ndarray  # (L, T)
    dc_var: np.ndarray  # (D, T)
    shed_var: np.ndarray  # (B, T)
    viol_var: np.ndarray  # (L, T); -1 when absent
    soft_rows: np.ndarray  # (L, T, 2); -1 when absent
    cost_constant: float


@dataclass
class MpdcopfSolution:
    status: str  # optimal | infeasible
    dispatch: np.ndarray  # (G, T) MW
    angles: np.ndarray  # (B, T) rad
    flows: np.ndarray  # (L, T) MW
    dc_flows: np.ndarray  # (D, T) MW
    shed: np.ndarray  # (B, T) MW
    violations: np.ndarray  # (L, T) MW
    objective: float
    lmp: np.ndarray  # (B, T)
    mu: np.ndarray  # (L, T), ≥ 0
    bus_ids: list[int] = field(default_factory=list)
    gen_ids: list[int] = field(default_factory=list)
    branch_ids: list[int] = field(default_factory=list)
    infeasible_hint: str = ""
    iterations: int = 0


def _segment_table(g):
    """(width, marginal_cost) covering [0, p_max]; below the first breakpoint
    the first marginal cost applies."""
    pts = g.cost_curve.points
    mcs = [mc for _, mc in pts]
    if any(m1 < m0 for m0, m1 in zip(mcs, mcs[1:])):
        raise UnboundedCost(f"gen {g.id}: non-convex cost curve")
    segs = []
    prev = 0.0
    for b, mc in pts:
        if b > prev:
            segs.append((b - prev, mc))
            prev = b
    if g.p_max > prev + 1e-9 and pts:
        segs.append((g.p_max - prev, pts[-1][1]))
    if not segs and g.p_max > 0:
        segs.append((g.p_max, pts[-1][1] if pts else 0.0))
    return segs


def build_problem(n: Network, demand: np.ndarray, availability: np.ndarray,
                  options: MpdcopfOptions | None = None,
                  initial_dispatch: np.ndarray | None = None) -> MpdcopfProblem:
    """Assemble the multi-period LP for the given hourly demand (bus × T) and
    generator availability (gen × T, capped to p_max)."""
    options = options or MpdcopfOptions()
    buses = sorted(n.buses, key=lambda b: b.id)
    gens = sorted(n.generators, key=lambda g: g.id)
    branches = sorted(n.branches, key=lambda b: b.id)
    dclines = sorted(n.dc_lines, key=lambda d: d.id)
    B, G, L, D = len(buses), len(gens), len(branches), len(dclines)

    demand = np.asarray(demand, dtype=np.float64)
    availability = np.asarray(availability, dtype=np.float64)
    if demand.ndim != 2 or demand.shape[0] != B:
        raise DimensionMismatch(f"demand shape {demand.shape} != ({B}, T)")
    T = demand.shape[1]
    if T < 1:
        raise DimensionMismatch("horizon must have T ≥ 1")
    if availability.shape != (G, T):
        raise DimensionMismatch(
            f"availability shape {availability.shape} != ({G}, {T})")
    if initial_dispatch is not None:
        initial_dispatch = np.asarray(initial_dispatch, dtype=np.float64)
        if initial_dispatch.shape != (G,):
            raise DimensionMismatch("initial_dispatch must be (G,)")

    bus_index = {b.id: i for i, b in enumerate(buses)}

    # one reference bus per interconnection: lowest bus id
    ref_buses = {}
    for b in buses:
        inter = n.bus_interconnection(b)
        if inter not in ref_buses or b.id < ref_buses[inter]:
            ref_buses[inter] = b.id
    ref_ids = set(ref_buses.values())

    var_lo, var_hi, var_cost, var_names = [], [], [], []

    def add_var(name, lo, hi, cost=0.0):
        var_names.append(name)
        var_lo.append(lo)
        var_hi.append(hi)
        var_cost.append(cost)
        return len(var_names) - 1

    seg_tables = [_segment_table(g) for g in gens]
    seg_vars: list[list[list[int]]] = []
    for gi, g in enumerate(gens):
        per_t = []
        for t in range(T):
            avail = min(max(availability[gi, t], 0.0), g.p_max)
            floor = min(g.p_min, avail) if g.must_run else 0.0
            idxs = []
            cum = 0.0
            for k, (width, mc) in enumerate(seg_tables[gi]):
                s_lo = min(max(floor - cum, 0.0), width)
                s_hi = min(max(avail - cum, 0.0), width)
                idxs.append(add_var(f"p_g{g.id}_t{t}_s{k}", s_lo, s_hi, mc))
                cum += width
            per_t.append(idxs)
        seg_vars.append(per_t)

    theta_var = np.empty((B, T), dtype=np.int64)
    for bi, bus in enumerate(buses):
        fixed = bus.id in ref_ids
        for t in range(T):
            lo = hi = 0.0
            if not fixed:
                lo, hi = -THETA_BOUND, THETA_BOUND
            theta_var[bi, t] = add_var(f"th_b{bus.id}_t{t}", lo, hi)

    # |f| on any line cannot exceed total injected power in a DC network,
    # so this is a safe stand-in for "unlimited"
    flow_big = 4.0 * max(1.0, float(np.abs(demand).sum())
                         + sum(g.p_max for g in gens))
    flow_var = np.empty((L, T), dtype=np.int64)
    for li, br in enumerate(branches):
        unlimited = br.capacity <= 0
        if options.soft_limits or unlimited:
            f_lo, f_hi = -flow_big, flow_big
        else:
            f_lo, f_hi = -br.capacity, br.capacity
        for t in range(T):
            flow_var[li, t] = add_var(f"f_l{br.id}_t{t}", f_lo, f_hi)

    dc_var = np.empty((D, T), dtype=np.int64)
    for di, dc in enumerate(dclines):
        for t in range(T):
            dc_var[di, t] = add_var(f"dc_{dc.id}_t{t}", -dc.capacity, dc.capacity)

    shed_var = np.empty((B, T), dtype=np.int64)
    for bi, bus in enumerate(buses):
        for t in range(T):
            hi_shed = max(demand[bi, t], 0.0) if options.allow_shed else 0.0
            shed_var[bi, t] = add_var(f"shed_b{bus.id}_t{t}", 0.0, hi_shed,
                                      options.load_shed_cost)

    viol_var = np.full((L, T), -1, dtype=np.int64)
    if options.soft_limits:
        for li, br in enumerate(branches):
            if br.capacity <= 0:
                continue
            for t in range(T):
                viol_var[li, t] = add_var(f"v_l{br.id}_t{t}", 0.0, BIG,
                                          options.penalty)

    rows = []  # (name, class, rhs, [(var, coeff), ...])

    balance_row = np.empty((B, T), dtype=np.int64)
    for t in range(T):
        for bi, bus in enumerate(buses):
            balance_row[bi, t] = len(rows)
            rows.append((f"bal_b{bus.id}_t{t}", "balance",
                         float(demand[bi, t]), []))
    for gi in range(G):
        for t in range(T):
            bi = bus_index[gens[gi].bus]
            for j in seg_vars[gi][t]:
                rows[balance_row[bi, t]][3].append((j, 1.0))
    for li, br in enumerate(branches):
        fi, ti = bus_index[br.from_bus], bus_index[br.to_bus]
        for t in range(T):
            rows[balance_row[fi, t]][3].append((int(flow_var[li, t]), -1.0))
            rows[balance_row[ti, t]][3].append((int(flow_var[li, t]), 1.0))
    for di, dc in enumerate(dclines):
        fi, ti = bus_index[dc.from_bus], bus_index[dc.to_bus]
        for t in range(T):
            rows[balance_row[fi, t]][3].append((int(dc_var[di, t]), -1.0))
            rows[balance_row[ti, t]][3].append((int(dc_var[di, t]), 1.0))
    for bi in range(B):
        for t in range(T):
            rows[balance_row[bi, t]][3].append((int(shed_var[bi, t]), 1.0))

    for li, br in enumerate(branches):
        k = n.base_mva / br.reactance
        fi, ti = bus_index[br.from_bus], bus_index[br.to_bus]
        for t in range(T):
            rows.append((f"flowdef_l{br.id}_t{t}", "flow", 0.0,
                         [(int(flow_var[li, t]), 1.0),
                          (int(theta_var[fi, t]), -k),
                          (int(theta_var[ti, t]), k)]))

    def add_ramp_rows(gi, g, t_hi, t_lo):
        r = g.ramp_limit
        up = [(j, 1.0) for j in seg_vars[gi][t_hi]]
        dn = [(j, -1.0) for j in seg_vars[gi][t_lo]] if t_lo is not None else []
        p0 = float(initial_dispatch[gi]) if t_lo is None else 0.0
        s_up = add_var(f"sru_g{g.id}_t{t_hi}", 0.0, BIG)
        rows.append((f"ramp_up_g{g.id}_t{t_hi}", "ramp", r + p0,
                     up + dn + [(s_up, 1.0)]))
        s_dn = add_var(f"srd_g{g.id}_t{t_hi}", 0.0, BIG)
        rows.append((f"ramp_dn_g{g.id}_t{t_hi}", "ramp", r - p0,
                     [(j, -cf) for j, cf in up + dn] + [(s_dn, 1.0)]))

    for gi, g in enumerate(gens):
        if initial_dispatch is not None:
            add_ramp_rows(gi, g, 0, None)
        for t in range(1, T):
            add_ramp_rows(gi, g, t, t - 1)

    soft_rows = np.full((L, T, 2), -1, dtype=np.int64)
    if options.soft_limits:
        for li, br in enumerate(branches):
            if br.capacity <= 0:
                continue
            for t in range(T):
                f = int(flow_var[li, t])
                v = int(viol_var[li, t])
                s1 = add_var(f"scu_l{br.id}_t{t}", 0.0, BIG)
                soft_rows[li, t, 0] = len(rows)
                rows.append((f"cap_up_l{br.id}_t{t}", "capacity", br.capacity,
                             [(f, 1.0), (v, -1.0), (s1, 1.0)]))
                s2 = add_var(f"scd_l{br.id}_t{t}", 0.0, BIG)
                soft_rows[li, t, 1] = len(rows)
                rows.append((f"cap_dn_l{br.id}_t{t}", "capacity", br.capacity,
                             [(f, -1.0), (v, -1.0), (s2, 1.0)]))

    nv = len(var_names)
    m = len(rows)
    A = np.zeros((m, nv))
    b_vec = np.empty(m)
    row_names, row_class = [], []
    for ri, (name, cls, rhs, entries) in enumerate(rows):
        row_names.append(name)
        row_class.append(cls)
        b_vec[ri] = rhs
        for j, coeff in entries:
            A[ri, j] += coeff

    cost_constant = sum(g.no_load_cost for g in gens if g.must_run) * T

    return MpdcopfProblem(
        network=n, T=T, demand=demand, availability=availability,
        options=options, initial_dispatch=initial_dispatch,
        bus_ids=[b.id for b in buses], gen_ids=[g.id for g in gens],
        branch_ids=[br.id for br in branches],
        dcline_ids=[d.id for d in dclines],
        c=np.array(var_cost), A=A, b=b_vec,
        lo=np.array(var_lo), hi=np.array(var_hi),
        var_names=var_names, row_names=row_names, row_class=row_class,
        balance_row=balance_row, seg_vars=seg_vars, theta_var=theta_var,
        flow_var=flow_var, dc_var=dc_var, shed_var=shed_var,
        viol_var=viol_var, soft_rows=soft_rows, cost_constant=cost_constant,
    )


def solve(p: MpdcopfProblem) -> MpdcopfSolution:
    """Solve the LP; optimal solutions carry dispatch, flows, shed, LMPs and
    branch shadow prices, infeasible ones carry a constraint-class hint."""
    res = solve_lp(p.c, p.A, p.b, p.lo, p.hi)
    B, T = p.demand.shape
    G = len(p.gen_ids)
    L = len(p.branch_ids)
    D = len(p.dcline_ids)
    zeros = lambda *shape: np.zeros(shape)

    if res.status != "optimal":
        by_class: dict[str, float] = {}
        for ri, resid in enumerate(res.artificial_residual):
            if resid > 1e-6:
                by_class[p.row_class[ri]] = by_class.get(p.row_class[ri], 0.0) + resid
        hint = max(by_class, key=by_class.get) if by_class else "unknown"
        return MpdcopfSolution(
            status="infeasible", dispatch=zeros(G, T), angles=zeros(B, T),
            flows=zeros(L, T), dc_flows=zeros(D, T), shed=zeros(B, T),
            violations=zeros(L, T), objective=float("nan"),
            lmp=zeros(B, T), mu=zeros(L, T),
            bus_ids=p.bus_ids, gen_ids=p.gen_ids, branch_ids=p.branch_ids,
            infeasible_hint=hint, iterations=res.iterations)

    x = res.x
    dispatch = np.zeros((G, T))
    for gi in range(G):
        for t in range(T):
            dispatch[gi, t] = sum(x[j] for j in p.seg_vars[gi][t])
    angles = x[p.theta_var]
    flows = x[p.flow_var] if L else np.zeros((L, T))
    dc_flows = x[p.dc_var] if D else np.zeros((D, T))
    shed = x[p.shed_var]
    lmp = res.duals[p.balance_row]

    branches = sorted(p.network.branches, key=lambda br: br.id)
    mu = np.zeros((L, T))
    violations = np.zeros((L, T))
    for li, br in enumerate(branches):
        if br.capacity <= 0:
            continue
        for t in range(T):
            if p.options.soft_limits:
                violations[li, t] = x[p.viol_var[li, t]]
                up, dn = p.soft_rows[li, t]
                mu[li, t] = abs(res.duals[up]) + abs(res.duals[dn])
            else:
                f = flows[li, t]
                if abs(abs(f) - br.capacity) <= BINDING_TOL * max(1.0, br.capacity):
                    mu[li, t] = abs(res.reduced_costs[p.flow_var[li, t]])

    return MpdcopfSolution(
        status="optimal", dispatch=dispatch, angles=angles, flows=flows,
        dc_flows=dc_flows, shed=shed, violations=violations,
        objective=res.objective + p.cost_constant, lmp=lmp, mu=mu,
        bus_ids=p.bus_ids, gen_ids=p.gen_ids, branch_ids=p.branch_ids,
        iterations=res.iterations)


def lmps(s: MpdcopfSolution) -> np.ndarray:
    if s.status != "optimal":
        raise NotOptimal("LMPs are defined only for optimal solutions")
    return s.lmp


def average_congestion(solutions: list[MpdcopfSolution], branch_id: int) -> float:
    """Time-average branch shadow price over all hours of the given windows."""
    total = 0.0
    hours = 0
    for s in solutions:
        li = s.branch_ids.index(branch_id)
        total += float(s.mu[li].sum())
        hours += s.mu.shape[1]
    return total / hours if hours else 0.0


def export_lp(p: MpdcopfProblem, path: str) -> None:
    """Write the problem in CPLEX-style textual LP format for cross-checking
    with external solvers."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("Minimize\n obj:")
        terms = [f" {c:+g} {name}" for c, name in zip(p.c, p.var_names) if c != 0]
        fh.write("".join(terms) or " 0")
        fh.write("\nSubject To\n")
        for ri, name in enumerate(p.row_names):
            coeffs = [(j, p.A[ri, j]) for j in np.nonzero(p.A[ri])[0]]
            lhs = "".join(f" {cf:+g} {p.var_names[j]}" for j, cf in coeffs)
            fh.write(f" {name}:{lhs} = {p.b[ri]:g}\n")
        fh.write("Bounds\n")
        for j, name in enumerate(p.var_names):
            fh.write(f" {p.lo[j]:g} <= {name} <= {p.hi[j]:g}\n")
        fh.write("End\n")


def write_solution_csv(s: MpdcopfSolution, path: str) -> None:
    """solution_<window>.csv dump: entity, hour, value, dual."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["entity", "hour", "value", "dual"])
        for gi, gid in enumerate(s.gen_ids):
            for t in range(s.dispatch.shape[1]):
                w.writerow([f"gen_{gid}", t, repr(float(s.dispatch[gi, t])), ""])
        for bi, bid in enumerate(s.bus_ids):
            for t in range(s.lmp.shape[1]):
                w.writerow([f"bus_{bid}", t, repr(float(s.shed[bi, t])),
                            repr(float(s.lmp[bi, t]))])
        for li, lid in enumerate(s.branch_ids):
            for t in range(s.flows.shape[1]):
                w.writerow([f"branch_{lid}", t, repr(float(s.flows[li, t])),
                            repr(float(s.mu[li, t]))])
