"""Static obstacle shapes: signed distances and line-of-sight tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_MARGIN = 0.55  # half the collision distance (0.25) plus 0.3 slack


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    radius: float
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"circle radius must be positive, got {self.radius}")

    def signed_distance(self, px: float, py: float) -> float:
        return math.hypot(px - self.cx, py - self.cy) - self.radius

    def intersects_segment(self, p: np.ndarray, q: np.ndarray) -> bool:
        p = np.asarray(p, dtype=float)
        d = np.asarray(q, dtype=float) - p
        c = np.array([self.cx, self.cy])
        dd = float(d @ d)
        t = 0.0 if dd == 0.0 else float(np.clip((c - p) @ d / dd, 0.0, 1.0))
        closest = p + t * d
        return float(np.hypot(*(closest - c))) < self.radius

    def to_dict(self) -> dict:
        return {"kind": "circle", "center_m": [self.cx, self.cy],
                "radius_m": self.radius, "margin_m": self.margin}


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle given by its min and max corners."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(f"degenerate rectangle {self}")

    def signed_distance(self, px: float, py: float) -> float:
        dx = max(self.xmin - px, px - self.xmax)
        dy = max(self.ymin - py, py - self.ymax)
        if dx > 0.0 or dy > 0.0:
            return math.hypot(max(dx, 0.0), max(dy, 0.0))
        return max(dx, dy)

    def contains(self, px: float, py: float) -> bool:
        return self.xmin <= px <= self.xmax and self.ymin <= py <= self.ymax

    def intersects_segment(self, p: np.ndarray, q: np.ndarray) -> bool:
        # Liang-Barsky clipping; touching the boundary counts as blocked.
        x0, y0 = float(p[0]), float(p[1])
        dx, dy = float(q[0]) - x0, float(q[1]) - y0
        t0, t1 = 0.0, 1.0
        for pk, qk in ((-dx, x0 - self.xmin), (dx, self.xmax - x0),
                       (-dy, y0 - self.ymin), (dy, self.ymax - y0)):
            if pk == 0.0:
                if qk < 0.0:
                    return False
                continue
            t = qk / pk
            if pk < 0.0:
                t0 = max(t0, t)
            else:
                t1 = min(t1, t)
            if t0 > t1:
                return False
        return True

    def to_dict(self) -> dict:
        return {"kind": "rect", "min_m": [self.xmin, self.ymin],
                "max_m": [self.xmax, self.ymax], "margin_m": self.margin}


Obstacle = Circle | Rect


def obstacle_from_dict(d: dict) -> Obstacle:
    kind = d.get("kind")
    margin = float(d.get("margin_m", DEFAULT_MARGIN))
    if kind == "circle":
        cx, cy = d["center_m"]
        return Circle(float(cx), float(cy), float(d["radius_m"]), margin)
    if kind == "rect":
        (x0, y0), (x1, y1) = d["min_m"], d["max_m"]
        return Rect(float(x0), float(y0), float(x1), float(y1), margin)
    raise ValueError(f"unknown obstacle kind {kind!r}")


def clearance(obstacles, px: float, py: float) -> float:
    """Smallest signed distance from a point to any obstacle surface (inf if none)."""
    return min((o.signed_distance(px, py) for o in obstacles), default=math.inf)


def line_of_sight(obstacles, p, q) -> bool:
    return not any(o.intersects_segment(p, q) for o in obstacles)


def pack_obstacles(obstacles) -> tuple[np.ndarray, np.ndarray]:
    """Split obstacles into (C, 4) circle rows and (K, 5) rectangle rows for the kernels."""
    circles = [(o.cx, o.cy, o.radius, o.margin) for o in obstacles if isinstance(o, Circle)]
    rects = [(o.xmin, o.ymin, o.xmax, o.ymax, o.margin) for o in obstacles if isinstance(o, Rect)]
    return (np.array(circles, dtype=float).reshape(-1, 4),
            np.array(rects, dtype=float).reshape(-1, 5))
