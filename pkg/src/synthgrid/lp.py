"""Dense bounded-variable revised simplex with dual extraction.

Standard form: minimize c·x subject to A x = b and lo ≤ x ≤ hi (finite
bounds; callers encode inequalities with bounded slack variables). Phase 1
drives row artificials to zero, phase 2 optimizes; Dantzig pricing switches
to Bland's rule after a fixed iteration budget to break cycling.

The kernel is the hot loop of every dispatch solve. It is compiled with
numba @njit by default; setting SYNTHGRID_BACKEND=numpy selects the
identical pure-numpy code path (see benchmarks/lp_backend.py).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalFailure

BIG = 1e15
FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIV_TOL = 1e-10
RATIO_TOL = 1e-9
REFACTOR_EVERY = 64

STATUS_OPTIMAL = 0
STATUS_ITER_LIMIT = 1
STATUS_UNBOUNDED = 2
STATUS_INFEASIBLE = 3


def _phase_impl(Ae, b, cost, lo, hi, x, basis, in_basis, at_upper,
                max_iter, bland_after):
    m, N = Ae.shape
    B = np.empty((m, m))
    it = 0
    while it < max_iter:
        it += 1
        for k in range(m):
            B[:, k] = Ae[:, basis[k]]
        if it % REFACTOR_EVERY == 0:
            # refresh basic values against accumulated drift
            xn = x.copy()
            for k in range(m):
                xn[basis[k]] = 0.0
            rhs = b - np.dot(Ae, xn)
            xb = np.linalg.solve(B, rhs)
            for k in range(m):
                x[basis[k]] = xb[k]
        y = np.linalg.solve(np.ascontiguousarray(B.T),
                            np.ascontiguousarray(cost[basis]))
        d = cost - np.dot(y, Ae)

        enter = -1
        sigma = 1.0
        if it > bland_after:
            for j in range(N):
                if in_basis[j] or lo[j] == hi[j]:
                    continue
                if not at_upper[j] and d[j] < -OPT_TOL:
                    enter = j
                    sigma = 1.0
                    break
                if at_upper[j] and d[j] > OPT_TOL:
                    enter = j
                    sigma = -1.0
                    break
        else:
            best = OPT_TOL
            for j in range(N):
                if in_basis[j] or lo[j] == hi[j]:
                    continue
                if not at_upper[j] and d[j] < -best:
                    best = -d[j]
                    enter = j
                    sigma = 1.0
                elif at_upper[j] and d[j] > best:
                    best = d[j]
                    enter = j
                    sigma = -1.0
        if enter < 0:
            return STATUS_OPTIMAL, it

        w = np.linalg.solve(B, np.ascontiguousarray(Ae[:, enter]))
        tmax = hi[enter] - lo[enter]
        leave = -1
        leave_to_upper = False
        for i in range(m):
            wi = sigma * w[i]
            bi = basis[i]
            if wi > PIV_TOL:
                ratio = (x[bi] - lo[bi]) / wi
                to_upper = False
            elif wi < -PIV_TOL:
                ratio = (hi[bi] - x[bi]) / (-wi)
                to_upper = True
            else:
                continue
            if ratio < 0.0:
                ratio = 0.0
            take = False
            if ratio < tmax - RATIO_TOL:
                take = True
            elif ratio < tmax + RATIO_TOL and leave >= 0:
                if it > bland_after:
                    take = bi < basis[leave]
                else:
                    take = abs(w[i]) > abs(w[leave])
            if take:
                tmax = ratio
                leave = i
                leave_to_upper = to_upper
        if tmax >= BIG * 0.5:
            return STATUS_UNBOUNDED, it

        t = tmax if tmax > 0.0 else 0.0
        for i in range(m):
            x[basis[i]] -= sigma * w[i] * t
        if leave < 0:
            x[enter] = lo[enter] if at_upper[enter] else hi[enter]
            at_upper[enter] = not at_upper[enter]
        else:
            x[enter] = x[enter] + sigma * t
            lv = basis[leave]
            x[lv] = hi[lv] if leave_to_upper else lo[lv]
            at_upper[lv] = leave_to_upper
            in_basis[lv] = False
            in_basis[enter] = True
            basis[leave] = enter
    return STATUS_ITER_LIMIT, it


def _kernel_impl(c, A, b, lo, hi, max_iter, bland_after):
    m, n = A.shape
    N = n + m
    Ae = np.zeros((m, N))
    Ae[:, :n] = A
    loe = np.empty(N)
    hie = np.empty(N)
    loe[:n] = lo
    hie[:n] = hi
    x = np.zeros(N)
    at_upper = np.zeros(N, np.bool_)
    for j in range(n):
        if abs(lo[j]) <= abs(hi[j]):
            x[j] = lo[j]
        else:
            x[j] = hi[j]
            at_upper[j] = True

    r = b - np.dot(A, x[:n])
    for i in range(m):
        s = 1.0 if r[i] >= 0.0 else -1.0
        Ae[i, n + i] = s
        x[n + i] = abs(r[i])
        loe[n + i] = 0.0
        hie[n + i] = BIG
    basis = np.arange(n, N)
    in_basis = np.zeros(N, np.bool_)
    in_basis[n:] = True

    cost1 = np.zeros(N)
    cost1[n:] = 1.0
    status1, it1 = _phase(Ae, b, cost1, loe, hie, x, basis, in_basis,
                          at_upper, max_iter, bland_after)
    art = x[n:].copy()
    if status1 == STATUS_ITER_LIMIT:
        return STATUS_ITER_LIMIT, x[:n].copy(), np.zeros(m), np.zeros(n), art, it1
    if art.sum() > FEAS_TOL * (1.0 + np.abs(b).sum()):
        return STATUS_INFEASIBLE, x[:n].copy(), np.zeros(m), np.zeros(n), art, it1

    # freeze artificials at zero for phase 2
    for i in range(m):
        hie[n + i] = 0.0
        if not in_basis[n + i]:
            x[n + i] = 0.0

    cost2 = np.zeros(N)
    cost2[:n] = c
    status2, it2 = _phase(Ae, b, cost2, loe, hie, x, basis, in_basis,
                          at_upper, max_iter, bland_after)
    iters = it1 + it2
    if status2 != STATUS_OPTIMAL:
        return status2, x[:n].copy(), np.zeros(m), np.zeros(n), art, iters

    # exact basic solution and duals from the final basis
    B = np.empty((m, m))
    for k in range(m):
        B[:, k] = Ae[:, basis[k]]
    xn = x.copy()
    for k in range(m):
        xn[basis[k]] = 0.0
    xb = np.linalg.solve(B, b - np.dot(Ae, xn))
    for k in range(m):
        x[basis[k]] = xb[k]
    y = np.linalg.solve(np.ascontiguousarray(B.T),
                        np.ascontiguousarray(cost2[basis]))
    d = cost2 - np.dot(y, Ae)
    return STATUS_OPTIMAL, x[:n].copy(), y, d[:n].copy(), art, iters


def _select_backend():
    choice = os.environ.get("SYNTHGRID_BACKEND", "numba").strip().lower()
    if choice not in ("numba", "numpy"):
        raise ConfigError(f"SYNTHGRID_BACKEND must be 'numba' or 'numpy', "
                          f"got {choice!r}")
    if choice == "numba":
        try:
            from numba import njit
        except ImportError:
            return "numpy", _phase_impl, _kernel_impl
        phase = njit(cache=True)(_phase_impl)
        globals()["_phase"] = phase  # _kernel_impl resolves _phase at compile
        kernel = njit(cache=True)(_kernel_impl)
        return "numba", phase, kernel
    return "numpy", _phase_impl, _kernel_impl


BACKEND, _phase, _kernel = _select_backend()


def lp_backend() -> str:
    return BACKEND


@dataclass
class LpResult:
    status: str  # optimal | infeasible | iteration_limit
    x: np.ndarray
    objective: float
    duals: np.ndarray  # y per equality row
    reduced_costs: np.ndarray
    artificial_residual: np.ndarray  # per-row Phase-1 residual (infeasible only)
    iterations: int


def solve_lp(c, A, b, lo, hi, max_iter: int | None = None) -> LpResult:
    """Solve min c·x s.t. Ax = b, lo ≤ x ≤ hi. Infinite bounds are clamped
    to ±1e15."""
    c = np.ascontiguousarray(c, dtype=np.float64)
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    lo = np.clip(np.asarray(lo, dtype=np.float64), -BIG, BIG)
    hi = np.clip(np.asarray(hi, dtype=np.float64), -BIG, BIG)
    m, n = A.shape
    if not (c.shape == (n,) and b.shape == (m,) and lo.shape == (n,)
            and hi.shape == (n,)):
        raise ValueError("inconsistent LP dimensions")
    if np.any(lo > hi + 1e-12):
        return LpResult("infeasible", np.zeros(n), 0.0, np.zeros(m),
                        np.zeros(n), np.ones(m), 0)
    if max_iter is None:
        max_iter = 200 * (m + n) + 2000
    bland_after = max_iter // 2
    status, x, y, d, art, iters = _kernel(c, A, b, lo, hi, max_iter,
                                          bland_after)
    if status == STATUS_OPTIMAL:
        return LpResult("optimal", x, float(np.dot(c, x)), y, d, art, iters)
    if status == STATUS_INFEASIBLE:
        return LpResult("infeasible", x, float("nan"), y, d, art, iters)
    raise NumericalFailure(
        f"simplex did not converge (status {status}, {iters} iterations)")
