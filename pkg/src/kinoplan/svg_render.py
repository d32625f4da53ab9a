"""Standalone SVG figures for plan documents and simulation traces.

Output is built from formatted strings only, so identical input yields
byte-identical SVG.
"""
from __future__ import annotations

from typing import Any, Mapping, Sequence

SCALE = 60.0  # px per meter
PAD = 0.75    # world-units padding around the content


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Canvas:
    def __init__(self, xs: Sequence[float], ys: Sequence[float], radii_pad: float) -> None:
        self.x_min = min(xs) - radii_pad - PAD
        self.x_max = max(xs) + radii_pad + PAD
        self.y_min = min(ys) - radii_pad - PAD
        self.y_max = max(ys) + radii_pad + PAD
        self.width = (self.x_max - self.x_min) * SCALE
        self.height = (self.y_max - self.y_min) * SCALE

    def px(self, x: float) -> str:
        return _fmt((x - self.x_min) * SCALE)

    def py(self, y: float) -> str:
        return _fmt((self.y_max - y) * SCALE)

    def header(self) -> list[str]:
        return [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(self.width)}" '
            f'height="{_fmt(self.height)}" viewBox="0 0 {_fmt(self.width)} {_fmt(self.height)}">',
            "<defs>",
            '<marker id="arrow" markerWidth="6" markerHeight="6" refX="3" refY="3" '
            'orient="auto" markerUnits="strokeWidth">'
            '<path d="M0,1 L5,3 L0,5 z" fill="#c62828"/></marker>',
            "</defs>",
            f'<rect width="{_fmt(self.width)}" height="{_fmt(self.height)}" fill="#fafafa"/>',
        ]


def _safety_circle(canvas: _Canvas, x: float, y: float, radius: float) -> str:
    return (
        f'<circle class="safety" cx="{canvas.px(x)}" cy="{canvas.py(y)}" '
        f'r="{_fmt(radius * SCALE)}" fill="none" stroke="#e53935" '
        'stroke-width="1.5" stroke-dasharray="6 4"/>'
    )


def _obstacle_dot(canvas: _Canvas, x: float, y: float) -> str:
    return (
        f'<circle class="obstacle" cx="{canvas.px(x)}" cy="{canvas.py(y)}" '
        'r="4" fill="#b71c1c"/>'
    )


def _endpoint(canvas: _Canvas, x: float, y: float, color: str, label: str) -> str:
    return (
        f'<circle class="{label}" cx="{canvas.px(x)}" cy="{canvas.py(y)}" '
        f'r="5" fill="{color}"/>'
    )


def _polyline(canvas: _Canvas, pts: Sequence[tuple[float, float]], cls: str) -> str:
    coords = " ".join(f"{canvas.px(x)},{canvas.py(y)}" for x, y in pts)
    return (
        f'<polyline class="{cls}" points="{coords}" fill="none" stroke="#1565c0" '
        'stroke-width="2" marker-mid="url(#arrow)"/>'
    )


def render_plan(doc: Mapping[str, Any]) -> str:
    """Figure for a plan document: obstacles, safety circles, chosen trajectory."""
    traj = [(s["position"][0], s["position"][1]) for s in doc["trajectory"]]
    obstacles = doc.get("obstacles", [])
    xs = [p[0] for p in traj] + [o["position"][0] for o in obstacles]
    ys = [p[1] for p in traj] + [o["position"][1] for o in obstacles]
    max_r = max([o["safety_radius"] for o in obstacles], default=0.0)
    canvas = _Canvas(xs, ys, max_r)

    parts = canvas.header()
    for o in obstacles:
        parts.append(_safety_circle(canvas, o["position"][0], o["position"][1], o["safety_radius"]))
    for o in obstacles:
        parts.append(_obstacle_dot(canvas, o["position"][0], o["position"][1]))
    parts.append(_polyline(canvas, traj, "trajectory"))
    parts.append(_endpoint(canvas, traj[0][0], traj[0][1], "#2e7d32", "start"))
    parts.append(_endpoint(canvas, traj[-1][0], traj[-1][1], "#1565c0", "goal"))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_trace(records: Sequence[Mapping[str, Any]]) -> str:
    """Figure for a simulation trace: vehicle path plus per-tick obstacle ghosts."""
    ticks = [r for r in records if r.get("type") == "tick"]
    if not ticks:
        raise ValueError("trace contains no tick records")
    path = [(r["vehicle"][0], r["vehicle"][1]) for r in ticks]
    ghost_pts: list[tuple[float, float]] = []
    for r in ticks:
        for o in r["obstacles"]:
            if o["true"] is not None:
                ghost_pts.append((o["true"]["position"][0], o["true"]["position"][1]))
    first = ticks[0]["obstacles"]
    xs = [p[0] for p in path] + [g[0] for g in ghost_pts]
    ys = [p[1] for p in path] + [g[1] for g in ghost_pts]
    canvas = _Canvas(xs, ys, 0.6)

    parts = canvas.header()
    for g in ghost_pts:
        parts.append(
            f'<circle class="ghost" cx="{canvas.px(g[0])}" cy="{canvas.py(g[1])}" '
            'r="2" fill="#ef9a9a"/>'
        )
    for o in first:
        if o["true"] is not None:
            x, y = o["true"]["position"]
            parts.append(_safety_circle(canvas, x, y, o["true"].get("safety_radius", 0.5)))
            parts.append(_obstacle_dot(canvas, x, y))
    parts.append(_polyline(canvas, path, "trajectory"))
    parts.append(_endpoint(canvas, path[0][0], path[0][1], "#2e7d32", "start"))
    parts.append(_endpoint(canvas, path[-1][0], path[-1][1], "#1565c0", "goal"))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
