"""Scenario construction: narrow hallway, T-intersection, open area, randomized suites."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .costs import AgentParams
from .geometry import Rect, clearance, obstacle_from_dict

R_RANGE = (1.2, 2.0)
SCALE_RANGE = (0.5, 1.5)


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    x0: np.ndarray
    params: tuple[AgentParams, ...]
    obstacles: tuple = ()
    workspace: tuple[float, float, float, float] | None = None
    meta: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float).reshape(-1, 4)
        if x0.shape[0] != len(self.params):
            raise ValueError("one initial state per agent required")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if self.workspace is not None:
            object.__setattr__(self, "workspace", tuple(float(w) for w in self.workspace))

    @property
    def n_agents(self) -> int:
        return len(self.params)

    @property
    def goals(self) -> np.ndarray:
        return np.array([p.goal for p in self.params], dtype=float).reshape(-1, 2)

    def validate(self, r_collision: float = 0.5) -> "Scenario":
        """Raise ``ValueError`` unless starts are collision-free and goals reachable."""
        if not np.all(np.isfinite(self.x0)):
            raise ValueError("non-finite initial state")
        pos = self.x0[:, :2]
        for i in range(self.n_agents):
            for j in range(i + 1, self.n_agents):
                if np.hypot(*(pos[i] - pos[j])) < r_collision:
                    raise ValueError(f"agents {i} and {j} start in collision")
        for i, p in enumerate(self.params):
            if clearance(self.obstacles, *pos[i]) < r_collision / 2:
                raise ValueError(f"agent {i} starts in contact with an obstacle")
            if clearance(self.obstacles, *p.goal) < 0:
                raise ValueError(f"goal of agent {i} is inside an obstacle")
            if self.workspace is not None:
                x0, y0, x1, y1 = self.workspace
                if not (x0 <= p.goal[0] <= x1 and y0 <= p.goal[1] <= y1):
                    raise ValueError(f"goal of agent {i} lies outside the workspace")
        return self

    def to_dict(self) -> dict:
        agents = []
        for x, p in zip(self.x0, self.params):
            agents.append({
                "state": {"px_m": x[0], "py_m": x[1], "theta_rad": x[2], "v_mps": x[3]},
                "params": p.to_dict(),
            })
        return {
            "name": self.name,
            "workspace_m": list(self.workspace) if self.workspace is not None else None,
            "obstacles": [o.to_dict() for o in self.obstacles],
            "agents": agents,
            "meta": self.meta,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        x0, params = [], []
        for a in d["agents"]:
            s = a["state"]
            x0.append([float(s["px_m"]), float(s["py_m"]),
                       float(s.get("theta_rad", 0.0)), float(s.get("v_mps", 0.0))])
            params.append(AgentParams.from_dict(a["params"]))
        ws = d.get("workspace_m")
        return cls(
            name=d.get("name", "scenario"),
            x0=np.array(x0).reshape(-1, 4),
            params=tuple(params),
            obstacles=tuple(obstacle_from_dict(o) for o in d.get("obstacles", [])),
            workspace=tuple(ws) if ws is not None else None,
            meta=dict(d.get("meta", {})),
            config=dict(d.get("config", {})),
        )


# -- geometry -----------------------------------------------------------------

def make_narrow_way(width: float = 1.0, length: float = 6.0, room_depth: float = 6.0,
                    room_width: float = 8.0):
    """Corridor along the x-axis centred at the origin, joining two open rooms.

    Returns ``(walls, workspace)``: two wall rectangles bounding the corridor
    and the overall ``(xmin, ymin, xmax, ymax)`` extent.
    """
    if not (0 < width < room_depth and length > 0 and room_width > 0):
        raise ValueError("corridor must be narrower than the rooms")
    h, half = room_depth / 2, length / 2
    walls = (Rect(-half, width / 2, half, h), Rect(-half, -h, half, -width / 2))
    return walls, (-half - room_width, -h, half + room_width, h)


def make_t_intersection(width: float = 1.2, arm_length: float = 7.0, stem_length: float = 6.0,
                        wall: float = 1.0):
    """Horizontal corridor (along x) with a stem descending from its middle.

    The two blocks flanking the stem hide the stem from the horizontal arms
    until an agent reaches the junction.
    """
    w2 = width / 2
    bottom = -w2 - stem_length
    obstacles = (
        Rect(-arm_length, w2, arm_length, w2 + wall),
        Rect(-arm_length, bottom, -w2, -w2),
        Rect(w2, bottom, arm_length, -w2),
    )
    return obstacles, (-arm_length, bottom, arm_length, w2)


# -- scenarios ------------------------------------------------------------------

def narrow_way_scenario(radii=(1.5, 2.0), **geometry) -> Scenario:
    walls, ws = make_narrow_way(**geometry)
    half = walls[0].xmax
    x_a, x_b = -half - 2.0, half + 2.0
    x0 = np.array([[x_a, 0.2, 0.0, 0.0], [x_b, -0.2, math.pi, 0.0]])
    params = (AgentParams(goal=(x_b, 0.2), r=radii[0]), AgentParams(goal=(x_a, -0.2), r=radii[1]))
    return Scenario("narrow_way", x0, params, walls, ws).validate()


def t_intersection_scenario(radii=(1.5, 1.8), **geometry) -> Scenario:
    obstacles, ws = make_t_intersection(**geometry)
    xmin, ymin, xmax, _ = ws
    # agent 0 climbs the stem and turns left; agent 1 crosses from the left arm
    x0 = np.array([[0.0, ymin + 1.5, math.pi / 2, 0.0], [xmin + 1.0, 0.0, 0.0, 0.0]])
    params = (AgentParams(goal=(xmin + 1.5, 0.0), r=radii[0]),
              AgentParams(goal=(xmax - 1.5, 0.0), r=radii[1]))
    return Scenario("t_intersection", x0, params, obstacles, ws).validate()


def make_open_area(n_agents: int = 3, radii=(1.2, 1.5, 2.0), radius: float = 4.0) -> Scenario:
    """Agents evenly spaced on a circle, each heading for the antipodal point."""
    if n_agents < 1:
        raise ValueError("need at least one agent")
    radii = tuple(radii) if len(radii) >= n_agents else tuple(radii) + (radii[-1],) * (n_agents - len(radii))
    x0, params = [], []
    for i in range(n_agents):
        ang = 2 * math.pi * i / n_agents
        sx, sy = radius * math.cos(ang), radius * math.sin(ang)
        x0.append([sx, sy, ang + math.pi, 0.0])
        params.append(AgentParams(goal=(-sx, -sy), r=radii[i]))
    pad = radius + 3.0
    return Scenario("open_area", np.array(x0), tuple(params), (), (-pad, -pad, pad, pad)).validate()


def random_narrow_way_suite(n_cases: int, seed: int = 0, width: float = 1.0, length: float = 6.0,
                            room_depth: float = 6.0, room_width: float = 8.0,
                            wall_clearance: float = 0.6, mouth_gap: float = 2.0) -> list[Scenario]:
    """Seeded randomized narrow-way cases with starts and goals in opposite rooms.

    Agent 0 starts in the left room heading right, agent 1 the reverse. Each
    agent draws its own safety radius and scale factors on Q, D and B. Starts
    and goals keep ``mouth_gap`` from the corridor ends so a parked agent
    never corks the corridor.
    """
    if n_cases < 1:
        raise ValueError("n_cases must be at least 1")
    walls, ws = make_narrow_way(width, length, room_depth, room_width)
    xmin, ymin, xmax, ymax = ws
    half = length / 2
    c = wall_clearance
    rng = np.random.default_rng(seed)
    base = AgentParams(goal=(0.0, 0.0))
    # rows of the rooms facing the corridor mouth, so straight paths clear the corners
    band = 0.6
    left = ((xmin + c, -half - mouth_gap), (-band, band))
    right = ((half + mouth_gap, xmax - c), (-band, band))

    def point(box):
        (x0, x1), (y0, y1) = box
        return rng.uniform(x0, x1), rng.uniform(y0, y1)

    suite = []
    for case in range(n_cases):
        while True:
            s0, g0 = point(left), point(right)
            s1, g1 = point(right), point(left)
            if math.dist(s0, s1) >= 1.0 and math.dist(g0, s1) >= 1.0 and math.dist(g1, s0) >= 1.0:
                break
        x0, params = [], []
        for start, goal, facing in ((s0, g0, 0.0), (s1, g1, math.pi)):
            theta = facing + rng.uniform(-math.pi / 6, math.pi / 6)
            k_q, k_d, k_b = rng.uniform(*SCALE_RANGE, size=3)
            x0.append([start[0], start[1], theta, 0.0])
            params.append(replace(
                base, goal=(float(goal[0]), float(goal[1])),
                Q=tuple(float(q * k_q) for q in base.Q),
                D=float(base.D * k_d), B=float(base.B * k_b),
                r=float(rng.uniform(*R_RANGE)),
            ))
        meta = {"seed": seed, "case": case, "r_range_m": list(R_RANGE),
                "Q_D_B_scale_range": list(SCALE_RANGE)}
        suite.append(Scenario(f"narrow_way_{seed}_{case:03d}", np.array(x0), tuple(params),
                              walls, ws, meta).validate())
    return suite
