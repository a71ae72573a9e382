"""Cost terms of the potential game and the joint potential.

The scalar helpers (:func:`stage_cost`, :func:`collision_cost`, ...) are
straightforward reference evaluations of one term each. :func:`potential` and
:func:`quadratize` evaluate the whole game through the active kernel backend
(compiled when available) on a :class:`GameSpec`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import dynamics
from .geometry import Obstacle, pack_obstacles

W_OBS = 1.0e4
W_BOX = 100.0
HORIZON = 80
# physical separation kept between any two agents: collision distance 0.5 m plus 0.3 m slack
CONTACT_DIST = 0.8
W_CONTACT = 1.0e5


@dataclass(frozen=True)
class AgentParams:
    """Goal and interaction parameters of one agent."""

    goal: tuple[float, float]
    # position weight calibrated so that yielding can pay off against the backup term
    Q: tuple[float, float, float, float] = (1.0, 1.0, 0.0, 0.0)
    R: tuple[float, float] = (1.0, 1.0)
    D: float = 40.0
    B: float = 10.0
    r: float = 1.5
    sensing_range: float = 5.0
    goal_theta: float = 0.0
    goal_v: float = 0.0
    u_lo: tuple[float, float] = (dynamics.A_MIN, dynamics.W_MIN)
    u_hi: tuple[float, float] = (dynamics.A_MAX, dynamics.W_MAX)
    v_lo: float = dynamics.V_MIN
    v_hi: float = dynamics.V_MAX

    def __post_init__(self):
        if min(self.Q) < 0 or min(self.R) < 0 or self.D < 0 or self.B < 0:
            raise ValueError("cost weights must be non-negative")
        if not (self.r > 0 and self.sensing_range > 0):
            raise ValueError("safety radius and sensing range must be positive")
        if any(lo > hi for lo, hi in zip(self.u_lo, self.u_hi)) or self.v_lo > self.v_hi:
            raise ValueError("inverted bounds")

    @property
    def goal_state(self) -> np.ndarray:
        return np.array([self.goal[0], self.goal[1], self.goal_theta, self.goal_v])

    def to_dict(self) -> dict:
        return {
            "goal_m": list(self.goal), "Q": list(self.Q), "R": list(self.R),
            "D": self.D, "B": self.B, "r_m": self.r, "sensing_range_m": self.sensing_range,
            "goal_theta_rad": self.goal_theta, "goal_v_mps": self.goal_v,
            "u_lo": list(self.u_lo), "u_hi": list(self.u_hi),
            "v_lo_mps": self.v_lo, "v_hi_mps": self.v_hi,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AgentParams":
        base = cls(goal=tuple(float(g) for g in d["goal_m"]))
        keys = {"Q": "Q", "R": "R", "D": "D", "B": "B", "r_m": "r",
                "sensing_range_m": "sensing_range", "goal_theta_rad": "goal_theta",
                "goal_v_mps": "goal_v", "u_lo": "u_lo", "u_hi": "u_hi",
                "v_lo_mps": "v_lo", "v_hi_mps": "v_hi"}
        kw = {}
        for k, attr in keys.items():
            if k in d:
                v = d[k]
                kw[attr] = tuple(float(x) for x in v) if isinstance(v, list) else float(v)
        return replace(base, **kw)


@dataclass(frozen=True)
class Movers:
    """Predicted positions of agents outside the game, treated as moving obstacles."""

    positions: np.ndarray  # (T + 1, P, 2)
    d_safe: np.ndarray     # (P,)
    weight: np.ndarray     # (P,)
    contact: bool = True   # also apply the stiff contact term of the game


@dataclass(frozen=True, eq=False)
class GameSpec:
    params: tuple[AgentParams, ...]
    d_safe: np.ndarray
    obstacles: tuple[Obstacle, ...] = ()
    horizon: int = HORIZON
    Ts: float = dynamics.TS
    w_obs: float = W_OBS
    w_box: float = W_BOX
    pair_weight: np.ndarray | None = None
    workspace: tuple[float, float, float, float] | None = None
    movers: Movers | None = None
    contact: float = CONTACT_DIST
    w_contact: float = W_CONTACT

    def __post_init__(self):
        n = len(self.params)
        if self.contact < 0 or self.w_contact < 0:
            raise ValueError("contact distance and weight must be non-negative")
        d = np.asarray(self.d_safe, dtype=float)
        if d.shape != (n, n):
            raise ValueError(f"d_safe must be ({n}, {n}), got {d.shape}")
        if n > 1:
            off = d[~np.eye(n, dtype=bool)]
            if not np.all(off > 0) or not np.array_equal(d, d.T):
                raise ValueError("d_safe must be symmetric and positive")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        object.__setattr__(self, "d_safe", d)
        if self.pair_weight is None:
            D = np.array([p.D for p in self.params])
            object.__setattr__(self, "pair_weight", np.maximum.outer(D, D) if n else np.zeros((0, 0)))

    @property
    def n_agents(self) -> int:
        return len(self.params)

    @cached_property
    def packed(self) -> "Packed":
        return Packed.from_spec(self)


@dataclass(frozen=True)
class Packed:
    """Flat float arrays describing a game; the only thing the kernels see."""

    Ts: float
    goal: np.ndarray      # (N, 4)
    Q: np.ndarray         # (N, 4)
    R: np.ndarray         # (N, 2)
    B: np.ndarray         # (N,)
    pair_w: np.ndarray    # (N, N)
    d_safe: np.ndarray    # (N, N)
    circles: np.ndarray   # (C, 4) cx, cy, radius, margin
    rects: np.ndarray     # (K, 5) xmin, ymin, xmax, ymax, margin
    u_lo: np.ndarray      # (N, 2)
    u_hi: np.ndarray      # (N, 2)
    v_lo: np.ndarray      # (N,)
    v_hi: np.ndarray      # (N,)
    workspace: np.ndarray  # (4,) or empty
    movers: np.ndarray    # (T + 1, P, 2)
    mover_ds: np.ndarray  # (P,)
    mover_w: np.ndarray   # (P,)
    w_obs: float
    w_box: float
    contact: float
    w_contact: float

    @classmethod
    def from_spec(cls, spec: GameSpec) -> "Packed":
        ps = spec.params
        f = lambda rows, width: np.ascontiguousarray(np.array(rows, dtype=float).reshape(-1, width))
        circles, rects = pack_obstacles(spec.obstacles)
        if spec.movers is None:
            movers = np.zeros((spec.horizon + 1, 0, 2))
            mds = mw = np.zeros(0)
        else:
            movers = np.ascontiguousarray(spec.movers.positions, dtype=float)
            mds = np.ascontiguousarray(spec.movers.d_safe, dtype=float)
            mw = np.ascontiguousarray(spec.movers.weight, dtype=float)
            if movers.shape[0] < spec.horizon + 1:
                raise ValueError("mover predictions shorter than the horizon")
            if spec.w_contact > 0 and spec.movers.contact:
                # each mover appears a second time carrying the contact term
                P = movers.shape[1]
                movers = np.ascontiguousarray(np.concatenate([movers, movers], axis=1))
                mds = np.concatenate([mds, np.full(P, float(spec.contact))])
                mw = np.concatenate([mw, np.full(P, float(spec.w_contact))])
        return cls(
            Ts=float(spec.Ts),
            goal=f([p.goal_state for p in ps], 4),
            Q=f([p.Q for p in ps], 4),
            R=f([p.R for p in ps], 2),
            B=np.array([p.B for p in ps], dtype=float),
            pair_w=np.ascontiguousarray(spec.pair_weight, dtype=float),
            d_safe=np.ascontiguousarray(spec.d_safe, dtype=float),
            circles=np.ascontiguousarray(circles),
            rects=np.ascontiguousarray(rects),
            u_lo=f([p.u_lo for p in ps], 2),
            u_hi=f([p.u_hi for p in ps], 2),
            v_lo=np.array([p.v_lo for p in ps], dtype=float),
            v_hi=np.array([p.v_hi for p in ps], dtype=float),
            workspace=np.array(spec.workspace if spec.workspace is not None else [], dtype=float),
            movers=movers, mover_ds=mds, mover_w=mw,
            w_obs=float(spec.w_obs), w_box=float(spec.w_box),
            contact=float(spec.contact), w_contact=float(spec.w_contact),
        )


# -- individual terms -------------------------------------------------------

def stage_cost(x, u, p: AgentParams) -> float:
    e = np.asarray(x, dtype=float) - p.goal_state
    u = np.asarray(u, dtype=float)
    return float(e @ (np.asarray(p.Q) * e) + u @ (np.asarray(p.R) * u))


def terminal_cost(x, p: AgentParams) -> float:
    e = np.asarray(x, dtype=float) - p.goal_state
    return float(e @ (np.asarray(p.Q) * e))


def collision_cost(xi, xj, d_safe: float, D: float) -> float:
    d = math.hypot(xi[0] - xj[0], xi[1] - xj[1])
    if d >= d_safe:
        return 0.0
    return (d - d_safe) ** 2 * D


def backup_cost(x, B: float) -> float:
    v = x[3]
    return -v * B if v < 0 else 0.0


def _hinge2(excess: float) -> float:
    return excess * excess if excess > 0 else 0.0


def agent_penalties(x, u, p: AgentParams, spec: GameSpec) -> float:
    """Soft-constraint penalty of one agent: obstacle clearance, input box, speed box, workspace."""
    total = 0.0
    for o in spec.obstacles:
        total += spec.w_obs * _hinge2(o.margin - o.signed_distance(x[0], x[1]))
    for j in range(2):
        total += spec.w_box * (_hinge2(u[j] - p.u_hi[j]) + _hinge2(p.u_lo[j] - u[j]))
    total += spec.w_box * (_hinge2(x[3] - p.v_hi) + _hinge2(p.v_lo - x[3]))
    if spec.workspace is not None:
        x0, y0, x1, y1 = spec.workspace
        total += spec.w_box * (_hinge2(x0 - x[0]) + _hinge2(x[0] - x1)
                               + _hinge2(y0 - x[1]) + _hinge2(x[1] - y1))
    return total


def contact_penalty(pi, pj, spec: GameSpec) -> float:
    """Stiff hinge keeping two positions at least ``spec.contact`` apart."""
    d = math.hypot(pi[0] - pj[0], pi[1] - pj[1])
    return spec.w_contact * _hinge2(spec.contact - d)


def constraint_penalties(x, u, spec: GameSpec) -> float:
    """Per-agent :func:`agent_penalties` plus the pairwise contact term for a joint state ``(N, 4)``."""
    total = sum(agent_penalties(x[i], u[i], p, spec) for i, p in enumerate(spec.params))
    n = spec.n_agents
    for i in range(n):
        for j in range(i + 1, n):
            total += contact_penalty(x[i], x[j], spec)
    return total


# -- whole-game evaluation ------------------------------------------------------

def _check_lengths(xs, U, spec: GameSpec) -> tuple[np.ndarray, np.ndarray]:
    xs = np.asarray(xs, dtype=float)
    U = np.asarray(U, dtype=float)
    n = spec.n_agents
    if U.ndim != 3 or U.shape[1:] != (n, 2) or xs.shape != (U.shape[0] + 1, n, 4):
        raise ValueError(f"inconsistent shapes xs={xs.shape} U={U.shape} for {n} agents")
    if spec.movers is not None and spec.movers.positions.shape[0] < U.shape[0] + 1:
        raise ValueError("mover predictions shorter than the plan")
    return xs, U


def potential(xs, U, spec: GameSpec) -> float:
    """Total potential of a joint trajectory ``xs`` (T+1, N, 4) under controls ``U`` (T, N, 2)."""
    from .kernels import make_kernel

    xs, U = _check_lengths(xs, U, spec)
    T = U.shape[0]
    return make_kernel(spec.packed).cost(xs.reshape(T + 1, -1), U.reshape(T, -1))


def quadratize(xs, U, spec: GameSpec):
    """Per-step gradients and Gauss-Newton Hessians of the potential.

    Returns ``(lx, lu, lxx, luu, lux)`` shaped ``(T+1, 4N)``, ``(T, 2N)``,
    ``(T+1, 4N, 4N)``, ``(T, 2N, 2N)``, ``(T, 2N, 4N)``; row ``T`` of ``lx``
    and ``lxx`` is the terminal term.
    """
    from .kernels import make_kernel

    xs, U = _check_lengths(xs, U, spec)
    T = U.shape[0]
    return make_kernel(spec.packed).quadratize(xs.reshape(T + 1, -1), U.reshape(T, -1))


def agent_cost(i: int, xs, U, spec: GameSpec) -> float:
    """Agent ``i``'s own cost: its stage, terminal, interaction and penalty terms.

    This equals the potential plus a remainder that does not depend on
    agent ``i``'s states or controls.
    """
    xs = np.asarray(xs, dtype=float)
    U = np.asarray(U, dtype=float)
    p = spec.params[i]
    T = U.shape[0]
    total = 0.0
    for k in range(T):
        x = xs[k, i]
        total += stage_cost(x, U[k, i], p) + backup_cost(x, p.B)
        total += agent_penalties(x, U[k, i], p, spec)
        for j in range(spec.n_agents):
            if j != i:
                total += collision_cost(x, xs[k, j], spec.d_safe[i, j], spec.pair_weight[i, j])
                total += contact_penalty(x, xs[k, j], spec)
        if spec.movers is not None:
            m = spec.movers
            for q in range(m.positions.shape[1]):
                total += collision_cost(x, m.positions[k, q], m.d_safe[q], m.weight[q])
                if m.contact:
                    total += contact_penalty(x, m.positions[k, q], spec)
    return total + terminal_cost(xs[T, i], p)
