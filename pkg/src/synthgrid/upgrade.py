"""Congestion-driven transmission upgrades: shadow-price ranked incremental
stepping, and soft-constraint violation sizing."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyLog, IterationCapExceeded
from .grid_model import Network, VRE_FUELS
from .harness import HarnessOptions, SimulationLog, WindowPlan, run_rolling_horizon
from .mpdcopf import MpdcopfOptions, build_problem, solve


@dataclass
class UpgradePolicy:
    shadow_price_threshold: float = 25.0  # currency/MWh
    step_size: float = 100.0  # MW
    max_iterations: int = 50
    target: str = "eliminate_shed"  # or "lmp_floor"
    lmp_floor: float = 5.0


@dataclass
class UpgradeRecord:
    branch_id: int
    old_capacity: float
    new_capacity: float
    iterations: int
    trigger: float  # avg shadow price or max violation MW


def find_congested(log: SimulationLog,
                   policy: UpgradePolicy) -> list[tuple[int, float]]:
    """Branches whose time-average shadow price exceeds the threshold, worst
    first; ties break toward the lower branch id."""
    if not log.windows:
        raise EmptyLog("no solved windows")
    out = []
    for li, lid in enumerate(log.branch_ids):
        avg = float(log.mu[li].mean())
        if avg > policy.shadow_price_threshold:
            out.append((lid, avg))
    out.sort(key=lambda pair: (-pair[1], pair[0]))
    return out


def _renewable_bus_avg_lmp(n: Network, log: SimulationLog) -> float:
    vre_buses = sorted({g.bus for g in n.generators if g.fuel in VRE_FUELS})
    if not vre_buses:
        return float("inf")
    rows = [log.bus_ids.index(b) for b in vre_buses]
    return float(log.lmp[rows].mean())


def _target_met(n: Network, log: SimulationLog, policy: UpgradePolicy) -> bool:
    if float(log.shed.sum()) > 1e-6:
        return False
    if policy.target == "lmp_floor":
        return _renewable_bus_avg_lmp(n, log) >= policy.lmp_floor
    return all(float(log.mu[li].mean()) <= policy.shadow_price_threshold
               for li in range(len(log.branch_ids)))


def step_upgrade(n: Network, demand: np.ndarray, availability: np.ndarray,
                 plan: WindowPlan, policy: UpgradePolicy,
                 options: HarnessOptions | None = None,
                 ) -> tuple[Network, list[UpgradeRecord]]:
    """Simulate, add one capacity step to the worst congested branch, repeat
    until the policy target holds. Raises IterationCapExceeded carrying the
    partial records."""
    options = options or HarnessOptions()
    net = n.copy()
    records: dict[int, UpgradeRecord] = {}
    for _ in range(policy.max_iterations):
        log = run_rolling_horizon(net, demand, availability, plan, options)
        if _target_met(net, log, policy):
            return net, list(records.values())
        ranked = find_congested(log, policy)
        if not ranked:
            # shed or low LMPs without a branch above threshold: step the
            # branch with the highest average shadow price anyway
            ranked = sorted(
                ((lid, float(log.mu[li].mean()))
                 for li, lid in enumerate(log.branch_ids)),
                key=lambda pair: (-pair[1], pair[0]))
            if not ranked:
                break
        branch_id, avg_mu = ranked[0]
        for i, br in enumerate(net.branches):
            if br.id == branch_id:
                old = br.capacity
                net.branches[i] = replace(br, capacity=old + policy.step_size)
                rec = records.get(branch_id)
                if rec is None:
                    records[branch_id] = UpgradeRecord(
                        branch_id, old, net.branches[i].capacity, 1, avg_mu)
                else:
                    rec.new_capacity = net.branches[i].capacity
                    rec.iterations += 1
                    rec.trigger = max(rec.trigger, avg_mu)
                break
    raise IterationCapExceeded(list(records.values()))


def size_upgrades_soft(n: Network, demand: np.ndarray,
                       availability: np.ndarray, plan: WindowPlan,
                       penalty: float = 2000.0,
                       options: HarnessOptions | None = None,
                       ) -> list[tuple[int, float]]:
    """Solve every window with soft branch limits and no shedding; per branch,
    the required extra capacity is its worst hourly violation."""
    base = options.mpdcopf if options is not None else MpdcopfOptions()
    soft = MpdcopfOptions(soft_limits=True, penalty=penalty,
                          load_shed_cost=base.load_shed_cost, allow_shed=False)
    branches = sorted(n.branches, key=lambda b: b.id)
    worst = np.zeros(len(branches))
    initial = None
    for k in range(plan.count):
        start, end = plan.bounds(k)
        problem = build_problem(n, demand[:, start:end],
                                availability[:, start:end], soft,
                                initial_dispatch=initial)
        sol = solve(problem)
        if sol.status != "optimal":
            continue
        worst = np.maximum(worst, sol.violations.max(axis=1))
        initial = sol.dispatch[:, -1].copy()
    return [(br.id, float(worst[li]))
            for li, br in enumerate(branches) if worst[li] > 1e-9]


def apply_upgrades(n: Network, requirements: list[tuple[int, float]]) -> Network:
    """Add the required extra MW to each branch; capacities never shrink."""
    net = n.copy()
    extra = dict(requirements)
    for i, br in enumerate(net.branches):
        if extra.get(br.id, 0.0) > 0:
            net.branches[i] = replace(br, capacity=br.capacity + extra[br.id])
    return net


def write_upgrades_csv(records: list[UpgradeRecord], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["branch", "old_mw", "new_mw", "trigger", "iterations"])
        for rec in sorted(records, key=lambda r: r.branch_id):
            w.writerow([rec.branch_id, repr(rec.old_capacity),
                        repr(rec.new_capacity), repr(rec.trigger),
                        rec.iterations])
