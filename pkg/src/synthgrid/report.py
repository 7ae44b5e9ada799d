"""Aggregation of simulation output, comparison against historical generation,
bounded cost revision, and report emission (CSV + SVG bar chart)."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, replace

from .errors import BadCap, IoError, ParseError
from .grid_model import Network
from .harness import SimulationLog

logger = logging.getLogger(__name__)

MWH_PER_TWH = 1e6


@dataclass
class ComparisonResult:
    rows: dict[tuple[str, str], tuple[float, float]]  # key -> (sim, hist) TWh
    euclidean: float
    sum_abs: float

    def error(self, key) -> float:
        sim, hist = self.rows[key]
        return sim - hist


def aggregate_generation(log: SimulationLog,
                         n: Network) -> dict[tuple[str, str], float]:
    """Dispatched energy in TWh per (state, fuel) over the horizon."""
    return {key: mwh / MWH_PER_TWH
            for key, mwh in log.energy_by_state_fuel(n).items()}


def compare(sim: dict[tuple[str, str], float],
            hist: dict[tuple[str, str], float]) -> ComparisonResult:
    """Per-key absolute errors plus Euclidean and summed-absolute aggregates;
    keys present on one side only count as zero on the other."""
    keys = set(sim) | set(hist)
    for key in keys:
        if key not in sim:
            logger.warning("key %s missing from simulated table, using 0", key)
        if key not in hist:
            logger.warning("key %s missing from historical table, using 0", key)
    rows = {key: (sim.get(key, 0.0), hist.get(key, 0.0)) for key in keys}
    errs = [s - h for s, h in rows.values()]
    return ComparisonResult(
        rows=rows,
        euclidean=math.sqrt(sum(e * e for e in errs)),
        sum_abs=sum(abs(e) for e in errs),
    )


def revise_costs(n: Network, cmp: ComparisonResult, cap: float = 0.05,
                 beta: float = 0.5) -> Network:
    """Scale each (state, fuel) group's marginal costs by
    clamp(1 + beta · relative_error, 1 − cap, 1 + cap): over-generating groups
    get costlier, under-generating ones cheaper, never by more than cap."""
    if not 0.0 < cap < 1.0:
        raise BadCap(f"cap must be in (0, 1), got {cap}")
    out = n.copy()
    for key, (sim, hist) in cmp.rows.items():
        if sim == hist:
            continue
        if hist > 0:
            rel = (sim - hist) / hist
            mult = 1.0 + beta * rel
        else:
            mult = 1.0 + cap  # over-generating against a zero target
        mult = min(max(mult, 1.0 - cap), 1.0 + cap)
        state, fuel = key
        for i, g in enumerate(out.generators):
            if g.state == state and g.fuel == fuel:
                out.generators[i] = replace(
                    g, cost_curve=g.cost_curve.scale_price(mult))
    return out


def load_historical(path: str) -> dict[tuple[str, str], float]:
    """historical.csv: state, fuel, twh."""
    if not os.path.exists(path):
        raise IoError(f"missing historical file: {path}")
    header = ["state", "fuel", "twh"]
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got != header:
            raise ParseError(path, 1, "-", f"header {got!r} != expected {header!r}")
        for r in reader:
            if r:
                out[(r[0], r[1])] = float(r[2])
    return out


def emit_report(cmp: ComparisonResult, csv_path: str, svg_path: str) -> None:
    """comparison.csv plus a grouped-bar SVG of simulated vs historical energy
    per (state, fuel); output is deterministic byte for byte."""
    keys = sorted(cmp.rows)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "fuel", "simulated_twh", "historical_twh",
                    "abs_error_twh"])
        for key in keys:
            sim, hist = cmp.rows[key]
            w.writerow([key[0], key[1], repr(sim), repr(hist),
                        repr(abs(sim - hist))])
        w.writerow(["_metric", "euclidean", repr(cmp.euclidean), "", ""])
        w.writerow(["_metric", "sum_abs", repr(cmp.sum_abs), "", ""])
    _write_bar_svg(cmp, keys, svg_path)


def _write_bar_svg(cmp: ComparisonResult, keys, path: str) -> None:
    width, height, margin = 800, 400, 60
    plot_w, plot_h = width - 2 * margin, height - 2 * margin
    peak = max((max(v) for v in cmp.rows.values()), default=0.0)
    scale = plot_h / peak if peak > 0 else 0.0
    group_w = plot_w / max(len(keys), 1)
    bar_w = group_w * 0.35

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
    ]
    for i, key in enumerate(keys):
        sim, hist = cmp.rows[key]
        x0 = margin + i * group_w + group_w * 0.1
        for j, (value, color) in enumerate(((sim, "#1f77b4"), (hist, "#ff7f0e"))):
            h = value * scale
            x = x0 + j * bar_w
            y = height - margin - h
            parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" '
                         f'height="{h:.2f}" fill="{color}"/>')
        parts.append(f'<text x="{x0 + bar_w:.2f}" y="{height - margin + 16}" '
                     f'font-size="10" text-anchor="middle">'
                     f'{key[0]}/{key[1]}</text>')
    parts.append('<text x="70" y="20" font-size="12" fill="#1f77b4">'
                 'simulated</text>')
    parts.append('<text x="150" y="20" font-size="12" fill="#ff7f0e">'
                 'historical</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
