"""Shared fixtures: small hand-built networks and case-directory helpers."""

from __future__ import annotations

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))  # make oracles importable

from synthgrid.grid_model import (Branch, Bus, CostCurve, DcLine, Generator,
                                  Network, Zone)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def make_bus(bid, zone_id=1, state="AA", base_kv=230.0, weight=1.0,
             demand=True):
    return Bus(id=bid, zone_id=zone_id, state=state, base_kv=base_kv,
               population_weight=weight, demand_participation=demand)


def make_gen(gid, bus, points, fuel="natural_gas", state="AA", p_min=0.0,
             ramp=1e6, no_load=0.0):
    p_max = points[-1][0]
    return Generator(id=gid, bus=bus, fuel=fuel, state=state, p_min=p_min,
                     p_max=p_max, ramp_limit=ramp, no_load_cost=no_load,
                     cost_curve=CostCurve(list(points)))


def make_branch(bid, f, t, cap, x=0.1, kind="line", spur=False):
    return Branch(id=bid, from_bus=f, to_bus=t, reactance=x, capacity=cap,
                  kind=kind, is_spur=spur)


@pytest.fixture
def two_bus():
    """The hand KKT example: cheap gen at bus 1, expensive at bus 2, a 50 MW
    line, 80 MW of demand at bus 2. Optimal: p=(50, 30), LMP=(10, 30), mu=20."""
    return Network(
        buses=[make_bus(1, weight=0.0, demand=False), make_bus(2)],
        branches=[make_branch(1, 1, 2, 50.0)],
        dc_lines=[],
        generators=[
            make_gen(1, 1, [(100.0, 10.0)]),
            make_gen(2, 2, [(100.0, 30.0)]),
        ],
        zones=[Zone(1, "alpha", "eastern")],
    )


@pytest.fixture
def triangle():
    """Three buses in a ring with equal reactances; superposition flows are
    easy to compute by hand."""
    return Network(
        buses=[make_bus(1, weight=0.0, demand=False),
               make_bus(2, weight=0.0, demand=False), make_bus(3)],
        branches=[
            make_branch(1, 1, 2, 0.0),
            make_branch(2, 2, 3, 0.0),
            make_branch(3, 1, 3, 0.0),
        ],
        dc_lines=[],
        generators=[make_gen(1, 1, [(200.0, 10.0)])],
        zones=[Zone(1, "alpha", "eastern")],
    )


@pytest.fixture
def chain3():
    """Cheap generation at bus 1, 200 MW of demand at bus 3, and an
    undersized 50 MW final line: 150 MW of missing transfer capability."""
    return Network(
        buses=[make_bus(1, weight=0.0, demand=False),
               make_bus(2, weight=0.0, demand=False), make_bus(3)],
        branches=[make_branch(1, 1, 2, 1000.0), make_branch(2, 2, 3, 50.0)],
        dc_lines=[],
        generators=[make_gen(1, 1, [(400.0, 10.0)])],
        zones=[Zone(1, "alpha", "eastern")],
    )


@pytest.fixture
def single_bus():
    """One bus, one 100 MW generator; used for overload-retry fixtures."""
    return Network(
        buses=[make_bus(1)],
        branches=[],
        dc_lines=[],
        generators=[make_gen(1, 1, [(100.0, 10.0)])],
        zones=[Zone(1, "alpha", "eastern")],
    )


def golden_dir():
    return os.path.join(FIXTURES, "golden")
