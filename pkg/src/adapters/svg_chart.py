"""
Standalone SVG drawings rendered from jinja2 templates: line charts of result
curves and example network topologies. Output is byte-identical for identical input.
"""

import os
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from jinja2 import Environment, StrictUndefined

try:
    from ..errors import ResultFormatError
    from ..netgen import Layer, WeightedNetwork
    from .exporters import read_result_csv
except ImportError:
    # Fallback for direct execution
    from errors import ResultFormatError
    from netgen import Layer, WeightedNetwork
    from adapters.exporters import read_result_csv

logger = logging.getLogger(__name__)

WIDTH, HEIGHT = 640, 420
MARGIN = {"left": 70, "right": 170, "top": 40, "bottom": 55}
COLORS = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd"]
TICKS = 5

CURVE_LABELS = {
    "crisis_F": "(a) crisis F",
    "baseline_b": "(b) homogeneous gamma",
    "baseline_c": "(c) F(0) + fN",
    "R_total": "(a) entire system",
    "R_shadow": "(b) shadow layer",
    "R_regulated": "(c) regulated layer",
}

SVG_TEMPLATE = """<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{{ width }}" height="{{ height }}" viewBox="0 0 {{ width }} {{ height }}">
<rect x="0" y="0" width="{{ width }}" height="{{ height }}" fill="white"/>
<text x="{{ (left + plot_right) / 2 }}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{{ title }}</text>
<line x1="{{ left }}" y1="{{ plot_bottom }}" x2="{{ plot_right }}" y2="{{ plot_bottom }}" stroke="black"/>
<line x1="{{ left }}" y1="{{ top }}" x2="{{ left }}" y2="{{ plot_bottom }}" stroke="black"/>
{% for tick in x_ticks %}
<line x1="{{ "%.2f"|format(tick.pos) }}" y1="{{ plot_bottom }}" x2="{{ "%.2f"|format(tick.pos) }}" y2="{{ plot_bottom + 5 }}" stroke="black"/>
<text x="{{ "%.2f"|format(tick.pos) }}" y="{{ plot_bottom + 18 }}" text-anchor="middle" font-family="sans-serif" font-size="11">{{ tick.label }}</text>
{% endfor %}
{% for tick in y_ticks %}
<line x1="{{ left - 5 }}" y1="{{ "%.2f"|format(tick.pos) }}" x2="{{ left }}" y2="{{ "%.2f"|format(tick.pos) }}" stroke="black"/>
<text x="{{ left - 8 }}" y="{{ "%.2f"|format(tick.pos + 4) }}" text-anchor="end" font-family="sans-serif" font-size="11">{{ tick.label }}</text>
{% endfor %}
<text x="{{ (left + plot_right) / 2 }}" y="{{ height - 15 }}" text-anchor="middle" font-family="sans-serif" font-size="12">{{ x_label }}</text>
<text x="18" y="{{ (top + plot_bottom) / 2 }}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 18 {{ (top + plot_bottom) / 2 }})">{{ y_label }}</text>
{% for curve in curves %}
<polyline fill="none" stroke="{{ curve.color }}" stroke-width="2" points="{{ curve.points }}"/>
<line x1="{{ plot_right + 15 }}" y1="{{ top + 10 + loop.index0 * 20 }}" x2="{{ plot_right + 35 }}" y2="{{ top + 10 + loop.index0 * 20 }}" stroke="{{ curve.color }}" stroke-width="2"/>
<text x="{{ plot_right + 40 }}" y="{{ top + 14 + loop.index0 * 20 }}" font-family="sans-serif" font-size="11">{{ curve.label }}</text>
{% endfor %}
</svg>
"""

_environment = Environment(undefined=StrictUndefined, autoescape=True, trim_blocks=True, lstrip_blocks=True)
_template = _environment.from_string(SVG_TEMPLATE)


def _curve_columns(columns: List[str]) -> List[str]:
    if "R_total" in columns:
        return ["R_total", "R_shadow", "R_regulated"]
    return ["crisis_F", "baseline_b", "baseline_c"]


def _span(values: List[float]) -> Tuple[float, float]:
    lo, hi = min(values), max(values)
    if hi - lo < 1e-12:
        return lo - 0.5, hi + 0.5
    return lo, hi


def _ticks(lo: float, hi: float, to_pos) -> List[Dict]:
    step = (hi - lo) / (TICKS - 1)
    return [{"pos": to_pos(lo + i * step), "label": f"{lo + i * step:.3g}"} for i in range(TICKS)]


def render_chart(columns: List[str], rows: List[Dict[str, Optional[float]]], title: str = "") -> str:
    """One polyline per curve column; blank cells are skipped."""
    curve_columns = [c for c in _curve_columns(columns) if any(r.get(c) is not None for r in rows)]
    if not curve_columns:
        raise ResultFormatError("no curve values to plot")

    xs = [r["f_or_q"] for r in rows]
    ys = [r[c] for r in rows for c in curve_columns if r[c] is not None]
    x_lo, x_hi = _span(xs)
    y_lo, y_hi = _span([min(0.0, min(ys)), max(ys)])

    left, top = MARGIN["left"], MARGIN["top"]
    plot_right = WIDTH - MARGIN["right"]
    plot_bottom = HEIGHT - MARGIN["bottom"]

    def x_pos(x: float) -> float:
        return left + (x - x_lo) / (x_hi - x_lo) * (plot_right - left)

    def y_pos(y: float) -> float:
        return plot_bottom - (y - y_lo) / (y_hi - y_lo) * (plot_bottom - top)

    curves = []
    for i, column in enumerate(curve_columns):
        points = " ".join(f"{x_pos(r['f_or_q']):.2f},{y_pos(r[column]):.2f}"
                          for r in rows if r[column] is not None)
        curves.append({"label": CURVE_LABELS.get(column, column), "color": COLORS[i % len(COLORS)],
                       "points": points})

    is_ratio = "R_total" in columns
    return _template.render(
        width=WIDTH, height=HEIGHT, left=left, top=top, plot_right=plot_right, plot_bottom=plot_bottom,
        title=title,
        x_label="relative inter-layer denseness q" if is_ratio else "fraction of shadow banks f",
        y_label="R(q)" if is_ratio else "number of bankruptcies F",
        x_ticks=_ticks(x_lo, x_hi, x_pos),
        y_ticks=_ticks(y_lo, y_hi, y_pos),
        curves=curves,
    )


def plot_csv(csv_path: str, svg_path: str, title: Optional[str] = None) -> int:
    """Render `csv_path` to `svg_path`; returns the number of curves. Nothing is written on error."""
    columns, rows = read_result_csv(csv_path)
    if title is None:
        title = os.path.splitext(os.path.basename(csv_path))[0]
    svg = render_chart(columns, rows, title)
    with open(svg_path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(svg)
    n_curves = svg.count("<polyline")
    logger.info(f"Wrote chart with {n_curves} curves to {svg_path}")
    return n_curves


NETWORK_SIZE = 560
SHADOW_COLOR, REGULATED_COLOR = "#1f77b4", "#d62728"

NETWORK_TEMPLATE = """<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{{ size }}" height="{{ size }}" viewBox="0 0 {{ size }} {{ size }}">
<rect x="0" y="0" width="{{ size }}" height="{{ size }}" fill="white"/>
<text x="{{ size / 2 }}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{{ title }}</text>
<g stroke="#888888" stroke-opacity="0.5" stroke-width="0.6">
{% for edge in edges %}
<line x1="{{ edge.x1 }}" y1="{{ edge.y1 }}" x2="{{ edge.x2 }}" y2="{{ edge.y2 }}"/>
{% endfor %}
</g>
{% for node in nodes %}
<circle class="{{ node.kind }}" cx="{{ node.x }}" cy="{{ node.y }}" r="{{ node.r }}" fill="{{ node.color }}" stroke="black" stroke-width="0.5"><title>bank {{ node.index }}</title></circle>
{% endfor %}
<rect x="14" y="{{ size - 46 }}" width="10" height="10" fill="{{ shadow_color }}"/>
<text x="30" y="{{ size - 37 }}" font-family="sans-serif" font-size="11">shadow bank</text>
<rect x="14" y="{{ size - 26 }}" width="10" height="10" fill="{{ regulated_color }}"/>
<text x="30" y="{{ size - 17 }}" font-family="sans-serif" font-size="11">regulated bank</text>
</svg>
"""

_network_template = _environment.from_string(NETWORK_TEMPLATE)


def _ring(members: np.ndarray, center: Tuple[float, float], radius: float) -> Dict[int, Tuple[float, float]]:
    angles = 2 * np.pi * np.arange(len(members)) / max(len(members), 1) - np.pi / 2
    return {int(bank): (center[0] + radius * np.cos(a), center[1] + radius * np.sin(a))
            for bank, a in zip(members, angles)}


def network_layout(network: WeightedNetwork, assets: Optional[np.ndarray] = None) -> Dict[int, Tuple[float, float]]:
    """
    Node positions: one ring per layer for layered systems, otherwise a single
    ring ordered by descending assets (bank index when no assets are given).
    """
    topology = network.topology
    n = network.n_banks
    layers = [np.flatnonzero(topology.layer == layer.value) for layer in (Layer.SHADOW, Layer.REGULATED)]
    if all(len(members) for members in layers):
        radius = NETWORK_SIZE * 0.2
        positions = _ring(layers[0], (NETWORK_SIZE * 0.27, NETWORK_SIZE * 0.5), radius)
        positions.update(_ring(layers[1], (NETWORK_SIZE * 0.73, NETWORK_SIZE * 0.5), radius))
        return positions

    order = np.arange(n) if assets is None else np.lexsort((np.arange(n), -np.asarray(assets, dtype=float)))
    return _ring(order, (NETWORK_SIZE * 0.5, NETWORK_SIZE * 0.5 + 6), NETWORK_SIZE * 0.38)


def render_network(network: WeightedNetwork, assets: Optional[np.ndarray] = None, title: str = "") -> str:
    """Banks as circles (shadow blue, regulated red, area ~ assets) and loans as lines."""
    if network.n_banks == 0:
        raise ResultFormatError("no banks to draw")
    positions = network_layout(network, assets)
    if assets is None:
        sizes = np.ones(network.n_banks)
    else:
        assets = np.asarray(assets, dtype=float)
        sizes = np.sqrt(assets / assets.max()) if assets.max() > 0 else np.ones(network.n_banks)

    creditors, debtors = np.nonzero(network.topology.adjacency)
    edges = [{"x1": f"{positions[c][0]:.2f}", "y1": f"{positions[c][1]:.2f}",
              "x2": f"{positions[d][0]:.2f}", "y2": f"{positions[d][1]:.2f}"}
             for c, d in zip(creditors.tolist(), debtors.tolist())]
    nodes = []
    for bank in range(network.n_banks):
        shadow = bool(network.topology.shadow[bank])
        x, y = positions[bank]
        nodes.append({
            "index": bank,
            "kind": "shadow" if shadow else "regulated",
            "color": SHADOW_COLOR if shadow else REGULATED_COLOR,
            "x": f"{x:.2f}", "y": f"{y:.2f}", "r": f"{3 + 6 * sizes[bank]:.2f}",
        })

    return _network_template.render(size=NETWORK_SIZE, title=title, edges=edges, nodes=nodes,
                                     shadow_color=SHADOW_COLOR, regulated_color=REGULATED_COLOR)


def plot_network(network: WeightedNetwork, svg_path: str, assets: Optional[np.ndarray] = None,
                 title: str = "") -> int:
    """Render `network` to `svg_path`; returns the number of banks drawn."""
    svg = render_network(network, assets, title)
    with open(svg_path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(svg)
    logger.info(f"Wrote network drawing of {network.n_banks} banks to {svg_path}")
    return network.n_banks
