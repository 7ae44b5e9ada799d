"""Year-long rolling-horizon simulation: windowing, boundary ramp coupling,
demand-reduction retries on infeasibility, and result logging."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import BadWindowLength, MissingProfile, RetryCapExceeded
from .grid_model import Network, VRE_FUELS
from .mpdcopf import MpdcopfOptions, MpdcopfSolution, build_problem, solve

RETRY_SCALE = 0.95


@dataclass
class WindowPlan:
    window_hours: int
    total_hours: int
    offsets: list[int]  # start hour of each window

    @property
    def count(self) -> int:
        return len(self.offsets)

    def bounds(self, k: int) -> tuple[int, int]:
        start = self.offsets[k]
        end = min(start + self.window_hours, self.total_hours)
        return start, end


@dataclass
class WindowRecord:
    index: int
    start: int
    end: int
    status: str
    demand_scale: float
    retries: int
    objective: float


@dataclass
class SimulationLog:
    plan: WindowPlan
    windows: list[WindowRecord]
    dispatch: np.ndarray  # (G, H)
    lmp: np.ndarray  # (B, H)
    mu: np.ndarray  # (L, H)
    shed: np.ndarray  # (B, H)
    violations: np.ndarray  # (L, H)
    bus_ids: list[int]
    gen_ids: list[int]
    branch_ids: list[int]
    solutions: list[MpdcopfSolution] = field(default_factory=list)

    def energy_by_state_fuel(self, n: Network) -> dict[tuple[str, str], float]:
        """MWh per (state, fuel) over the simulated horizon."""
        gmap = {g.id: g for g in n.generators}
        out: dict[tuple[str, str], float] = {}
        for gi, gid in enumerate(self.gen_ids):
            g = gmap[gid]
            key = (g.state, g.fuel)
            out[key] = out.get(key, 0.0) + float(self.dispatch[gi].sum())
        return out


def plan_windows(total_hours: int, window_hours: int = 144) -> WindowPlan:
    """Contiguous non-overlapping windows covering [0, total_hours); all of
    length W except possibly a truncated final window."""
    if window_hours < 2:
        raise BadWindowLength("window length must be ≥ 2")
    if total_hours < window_hours:
        raise BadWindowLength(
            f"horizon {total_hours} shorter than window {window_hours}")
    offsets = list(range(0, total_hours, window_hours))
    return WindowPlan(window_hours=window_hours, total_hours=total_hours,
                      offsets=offsets)


@dataclass
class HarnessOptions:
    retry_cap: int = 20
    mpdcopf: MpdcopfOptions = field(default_factory=MpdcopfOptions)


def build_inputs(n: Network, demand_profiles: dict, vre_profiles: dict,
                 horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Demand matrix over participating buses (zero elsewhere) and per-hour
    availability for every generator (VRE capped by profile, rest at p_max)."""
    buses = sorted(n.buses, key=lambda b: b.id)
    gens = sorted(n.generators, key=lambda g: g.id)
    demand = np.zeros((len(buses), horizon))
    for bi, bus in enumerate(buses):
        if bus.demand_participation:
            if bus.id not in demand_profiles:
                raise MissingProfile(f"demand bus {bus.id}")
            values = demand_profiles[bus.id].values
            if len(values) < horizon:
                raise MissingProfile(f"demand bus {bus.id} covers "
                                     f"{len(values)} h < {horizon} h")
            demand[bi] = values[:horizon]
    availability = np.empty((len(gens), horizon))
    for gi, g in enumerate(gens):
        if g.fuel in VRE_FUELS:
            if g.id not in vre_profiles:
                raise MissingProfile(f"vre gen {g.id}")
            values = vre_profiles[g.id].values
            if len(values) < horizon:
                raise MissingProfile(f"vre gen {g.id} covers "
                                     f"{len(values)} h < {horizon} h")
            availability[gi] = np.clip(values[:horizon], 0.0, g.p_max)
        else:
            availability[gi] = g.p_max
    return demand, availability


def run_rolling_horizon(n: Network, demand: np.ndarray,
                        availability: np.ndarray, plan: WindowPlan,
                        options: HarnessOptions | None = None) -> SimulationLog:
    """Solve the windows in order. Each window k > 1 starts ramp-constrained
    from the previous window's final-hour dispatch; infeasible windows retry
    with demand scaled by 0.95 per retry up to the cap."""
    options = options or HarnessOptions()
    buses = sorted(n.buses, key=lambda b: b.id)
    gens = sorted(n.generators, key=lambda g: g.id)
    branches = sorted(n.branches, key=lambda b: b.id)
    B, G, L = len(buses), len(gens), len(branches)
    H = plan.total_hours
    if demand.shape != (B, H):
        raise MissingProfile(f"demand matrix shape {demand.shape} != ({B}, {H})")
    if availability.shape != (G, H):
        raise MissingProfile(
            f"availability matrix shape {availability.shape} != ({G}, {H})")

    log = SimulationLog(
        plan=plan, windows=[],
        dispatch=np.zeros((G, H)), lmp=np.zeros((B, H)), mu=np.zeros((L, H)),
        shed=np.zeros((B, H)), violations=np.zeros((L, H)),
        bus_ids=[b.id for b in buses], gen_ids=[g.id for g in gens],
        branch_ids=[br.id for br in branches])

    initial_dispatch = None
    for k in range(plan.count):
        start, end = plan.bounds(k)
        base_demand = demand[:, start:end]
        avail = availability[:, start:end]
        retries = 0
        while True:
            scale = RETRY_SCALE ** retries
            problem = build_problem(n, base_demand * scale, avail,
                                    options.mpdcopf,
                                    initial_dispatch=initial_dispatch)
            sol = solve(problem)
            if sol.status == "optimal":
                break
            retries += 1
            if retries > options.retry_cap:
                raise RetryCapExceeded(k)
        log.windows.append(WindowRecord(
            index=k, start=start, end=end, status=sol.status,
            demand_scale=scale, retries=retries, objective=sol.objective))
        log.dispatch[:, start:end] = sol.dispatch
        log.lmp[:, start:end] = sol.lmp
        log.mu[:, start:end] = sol.mu
        log.shed[:, start:end] = sol.shed
        log.violations[:, start:end] = sol.violations
        log.solutions.append(sol)
        # couple the next window to the achieved (possibly reduced) end state
        initial_dispatch = sol.dispatch[:, -1].copy()
    return log


# --- log files -------------------------------------------------------------------

def write_window_log(log: SimulationLog, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["window", "start_hour", "end_hour", "status",
                    "demand_scale", "retries", "objective"])
        for rec in log.windows:
            w.writerow([rec.index, rec.start, rec.end, rec.status,
                        repr(rec.demand_scale), rec.retries,
                        repr(rec.objective)])


def write_hourly_log(log: SimulationLog, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["entity", "hour", "dispatch_or_shed_mw", "price"])
        H = log.dispatch.shape[1]
        for gi, gid in enumerate(log.gen_ids):
            for t in range(H):
                w.writerow([f"gen_{gid}", t, repr(float(log.dispatch[gi, t])), ""])
        for bi, bid in enumerate(log.bus_ids):
            for t in range(H):
                w.writerow([f"bus_{bid}", t, repr(float(log.shed[bi, t])),
                            repr(float(log.lmp[bi, t]))])
        for li, lid in enumerate(log.branch_ids):
            for t in range(H):
                w.writerow([f"branch_{lid}", t, repr(float(log.mu[li, t])), ""])


def write_energy_log(log: SimulationLog, n: Network, path: str) -> None:
    energy = log.energy_by_state_fuel(n)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "fuel", "mwh"])
        for (state, fuel) in sorted(energy):
            w.writerow([state, fuel, repr(energy[(state, fuel)])])
