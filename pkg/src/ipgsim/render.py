"""SVG frames of a run: walls, goals, past paths, plans and forecasts."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .geometry import Circle, Rect
from .sim import SimTrace

PX_PER_M = 40.0
PAD_M = 0.5
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _color(i: int) -> str:
    return COLORS[i % len(COLORS)]


def _extent(trace: SimTrace) -> tuple[float, float, float, float]:
    if trace.scenario.workspace is not None:
        return trace.scenario.workspace
    pts = np.concatenate([trace.states[:, :, :2].reshape(-1, 2), trace.scenario.goals])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])


class _Canvas:
    def __init__(self, extent):
        x0, y0, x1, y1 = extent
        self.x0, self.y1 = x0 - PAD_M, y1 + PAD_M
        self.width = (x1 - x0 + 2 * PAD_M) * PX_PER_M
        self.height = (y1 - y0 + 2 * PAD_M) * PX_PER_M
        self.items: list[str] = []

    def xy(self, x, y) -> tuple[float, float]:
        return (x - self.x0) * PX_PER_M, (self.y1 - y) * PX_PER_M

    def points(self, pts) -> str:
        return " ".join("%.2f,%.2f" % self.xy(x, y) for x, y in pts)

    def add(self, s: str) -> None:
        self.items.append(s)

    def svg(self, title: str) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width:.0f}" '
                f'height="{self.height:.0f}" viewBox="0 0 {self.width:.2f} {self.height:.2f}">')
        return "\n".join([head, f"<title>{title}</title>",
                          '<rect width="100%" height="100%" fill="white"/>', *self.items, "</svg>"]) + "\n"


def frame_svg(trace: SimTrace, step: int) -> str:
    """One frame at ``step``: solid past paths, dark dashed plans, light dashed forecasts."""
    if not 0 <= step < trace.states.shape[0]:
        raise IndexError(f"step {step} outside the trace")
    cv = _Canvas(_extent(trace))
    for o in trace.scenario.obstacles:
        if isinstance(o, Rect):
            (ax, ay), (bx, by) = cv.xy(o.xmin, o.ymax), cv.xy(o.xmax, o.ymin)
            cv.add(f'<rect class="obstacle" x="{ax:.2f}" y="{ay:.2f}" width="{bx - ax:.2f}" '
                   f'height="{by - ay:.2f}" fill="#888888"/>')
        elif isinstance(o, Circle):
            cx, cy = cv.xy(o.cx, o.cy)
            cv.add(f'<circle class="obstacle" cx="{cx:.2f}" cy="{cy:.2f}" '
                   f'r="{o.radius * PX_PER_M:.2f}" fill="#888888"/>')
    for i, g in enumerate(trace.scenario.goals):
        gx, gy = cv.xy(*g)
        cv.add(f'<circle class="goal" cx="{gx:.2f}" cy="{gy:.2f}" r="5" fill="none" '
               f'stroke="{_color(i)}" stroke-width="2"/>')
    if step < len(trace.decisions):
        for i, d in enumerate(trace.decisions[step]):
            for a, pts in sorted(d.planned_positions().items()):
                if a == i:
                    style = f'class="plan" stroke="{_color(i)}" stroke-opacity="0.9"'
                else:
                    style = f'class="prediction" stroke="{_color(i)}" stroke-opacity="0.35"'
                cv.add(f'<polyline {style} fill="none" stroke-width="1.5" stroke-dasharray="4,3" '
                       f'points="{cv.points(pts)}"/>')
    for i in range(trace.scenario.n_agents):
        past = trace.states[: step + 1, i, :2]
        cv.add(f'<polyline class="trajectory" fill="none" stroke="{_color(i)}" stroke-width="2" '
               f'points="{cv.points(past)}"/>')
        px, py = cv.xy(*trace.states[step, i, :2])
        r = trace.scenario.params[i].r * PX_PER_M
        cv.add(f'<circle class="safety" cx="{px:.2f}" cy="{py:.2f}" r="{r:.2f}" fill="none" '
               f'stroke="{_color(i)}" stroke-opacity="0.4" stroke-dasharray="1,3"/>')
        cv.add(f'<circle class="agent" cx="{px:.2f}" cy="{py:.2f}" '
               f'r="{trace.cfg.r_collision / 2 * PX_PER_M:.2f}" fill="{_color(i)}"/>')
    t = step * trace.cfg.Ts
    return cv.svg(f"{trace.scenario.name} step {step} t={t:.1f}s")


def render_frames(trace: SimTrace, out_dir, every: int = 10) -> list[Path]:
    """Write ``frame_XXXXX.svg`` for steps ``0, every, 2*every, ...``."""
    if every < 1:
        raise ValueError("every must be at least 1")
    if trace.states.shape[0] == 0:
        raise ValueError("trace is empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for s in range(0, trace.states.shape[0], every):
        p = out / f"frame_{s:05d}.svg"
        p.write_text(frame_svg(trace, s))
        paths.append(p)
    return paths
