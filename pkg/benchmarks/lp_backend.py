"""Compare the numba and numpy LP backends on multi-period OPF workloads.

The backend is chosen at import time from SYNTHGRID_BACKEND, so this script
re-runs itself in a subprocess once per backend and reports wall-clock
timings side by side.

Usage:
    python benchmarks/lp_backend.py [--buses N] [--hours T] [--repeat R]
"""

import argparse
import os
import subprocess
import sys
import time


def build_case(n_buses: int, n_hours: int, seed: int):
    import numpy as np

    from synthgrid.grid_model import (Branch, Bus, CostCurve, Generator,
                                      Network, Zone)

    rng = np.random.default_rng(seed)
    buses = [Bus(i + 1, zone_id=1, state="AA", base_kv=230.0,
                 population_weight=1.0, demand_participation=True)
             for i in range(n_buses)]
    branches = [Branch(i, i, i + 1, reactance=float(rng.uniform(0.02, 0.2)),
                       capacity=float(rng.uniform(40, 120)),
                       kind="line", is_spur=False)
                for i in range(1, n_buses)]
    branches.append(Branch(n_buses, 1, n_buses,
                           reactance=float(rng.uniform(0.02, 0.2)),
                           capacity=float(rng.uniform(40, 120)),
                           kind="line", is_spur=False))
    gens = []
    for i in range(1, n_buses + 1, 2):
        half = float(rng.uniform(40, 80))
        mc1, mc2 = np.sort(rng.uniform(10, 60, 2))
        curve = CostCurve(points=[(half, float(mc1)),
                                  (2 * half, float(mc2))])
        gens.append(Generator(len(gens) + 1, bus=i, fuel="natural_gas",
                              state="AA", p_min=0.0, p_max=2 * half,
                              ramp_limit=float(rng.uniform(20, 60)),
                              no_load_cost=0.0, cost_curve=curve))
    net = Network(buses=buses, branches=branches, dc_lines=[],
                  generators=gens, zones=[Zone(1, "alpha", "eastern")])
    total_cap = sum(g.p_max for g in gens)
    demand = rng.uniform(0.2, 0.7) * total_cap / n_buses * (
        0.8 + 0.4 * rng.random((n_buses, n_hours)))
    avail = np.tile([[g.p_max] for g in gens], (1, n_hours))
    return net, demand, avail


def run_once(n_buses: int, n_hours: int, repeat: int) -> None:
    from synthgrid.lp import lp_backend
    from synthgrid.mpdcopf import build_problem, solve

    net, demand, avail = build_case(n_buses, n_hours, seed=42)
    problem = build_problem(net, demand, avail)
    solve(problem)  # warm-up: numba JIT compilation happens here
    t0 = time.perf_counter()
    for _ in range(repeat):
        sol = solve(problem)
    elapsed = (time.perf_counter() - t0) / repeat
    print(f"{lp_backend():>6}  buses={n_buses:<4d} hours={n_hours:<4d} "
          f"status={sol.status:<8s} {elapsed * 1000:9.1f} ms/solve")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--buses", type=int, default=10)
    parser.add_argument("--hours", type=int, default=8)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--worker", action="store_true",
                        help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        run_once(args.buses, args.hours, args.repeat)
        return

    for backend in ("numpy", "numba"):
        env = dict(os.environ, SYNTHGRID_BACKEND=backend)
        subprocess.run(
            [sys.executable, __file__, "--worker",
             "--buses", str(args.buses), "--hours", str(args.hours),
             "--repeat", str(args.repeat)],
            env=env, check=True)


if __name__ == "__main__":
    main()
