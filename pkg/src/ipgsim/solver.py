"""iLQR over the stacked joint system, minimizing the potential of a game."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .costs import HORIZON, GameSpec
from .kernels import make_kernel


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 100
    tol: float = 1e-4
    reg_init: float = 1e-6
    reg_grow: float = 10.0
    reg_shrink: float = 2.0
    reg_max: float = 1e8
    line_search: tuple[float, ...] = (1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125)
    horizon: int = HORIZON

    def __post_init__(self):
        if min(self.max_iterations, self.tol, self.reg_init, self.reg_grow,
               self.reg_shrink, self.reg_max, self.horizon) <= 0:
            raise ValueError("solver settings must be positive")
        if not all(0 < a <= 1 for a in self.line_search):
            raise ValueError("line-search steps must lie in (0, 1]")


@dataclass
class JointPlan:
    """Open-loop joint solution: controls ``U`` (T, N, 2) and their rollout ``xs`` (T+1, N, 4)."""

    U: np.ndarray
    xs: np.ndarray
    cost: float
    converged: bool
    iterations: int
    cost_history: list[float] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return self.U.shape[0]


def shift_plan(U: np.ndarray) -> np.ndarray:
    """Advance a plan by one step, repeating the final control."""
    U = np.asarray(U, dtype=float)
    if U.shape[0] == 0:
        return U.copy()
    return np.concatenate([U[1:], U[-1:]], axis=0)


def goal_seeking_guess(x0, spec: GameSpec, speed: float = 1.0, gain: float = 2.0) -> np.ndarray:
    """Controls of a simple steer-then-drive tracker toward each agent's goal.

    Used as an alternative initial guess: from rest, the linearization carries
    no heading sensitivity, so plans seeded at zero cannot discover turning.
    """
    x0 = np.asarray(x0, dtype=float)
    T, Ts = spec.horizon, spec.Ts
    U = np.zeros((T, spec.n_agents, 2))
    for i, p in enumerate(spec.params):
        px, py, th, v = x0[i]
        for k in range(T):
            dx, dy = p.goal[0] - px, p.goal[1] - py
            err = math.atan2(dy, dx) - th
            err = math.atan2(math.sin(err), math.cos(err))
            w = min(max(gain * err, p.u_lo[1]), p.u_hi[1])
            # creep while turning, then cruise, slowing near the goal
            target = min(speed * max(math.cos(err), 0.1), math.hypot(dx, dy))
            a = min(max((target - v) / Ts, p.u_lo[0]), p.u_hi[0])
            U[k, i] = a, w
            v = min(max(v + Ts * a, p.v_lo), p.v_hi)
            px += Ts * v * math.cos(th)
            py += Ts * v * math.sin(th)
            th += Ts * w
    return U


def backing_guess(x0, spec: GameSpec, agent: int, speed: float = 1.0) -> np.ndarray:
    """Like :func:`goal_seeking_guess`, except ``agent`` reverses straight back."""
    x0 = np.asarray(x0, dtype=float)
    U = goal_seeking_guess(x0, spec)
    p = spec.params[agent]
    v = x0[agent, 3]
    for k in range(spec.horizon):
        a = min(max((-speed - v) / spec.Ts, p.u_lo[0]), p.u_hi[0])
        U[k, agent] = a, 0.0
        v = min(max(v + spec.Ts * a, p.v_lo), p.v_hi)
    return U


def initial_guesses(x0, spec: GameSpec, warm=None) -> list[np.ndarray]:
    """Warm start (if any), goal seeking, and one backing-off variant per agent."""
    guesses = [] if warm is None else [np.asarray(warm, dtype=float)]
    guesses.append(goal_seeking_guess(x0, spec))
    guesses.extend(backing_guess(x0, spec, i) for i in range(spec.n_agents))
    return guesses


def solve(x0, spec: GameSpec, U_init=None, cfg: SolverConfig = SolverConfig(),
          backend: str | None = None) -> JointPlan:
    """Minimize the potential of ``spec`` from joint state ``x0`` (N, 4).

    Levenberg-regularized backward passes and a backtracking forward pass that
    accepts any cost decrease. A stall (regularization past ``reg_max`` without
    an accepted step) returns the best plan found with ``converged=False``.
    ``backend`` picks a kernel implementation (default: the active one).
    """
    x0 = np.asarray(x0, dtype=float)
    N, T = spec.n_agents, spec.horizon
    if x0.shape != (N, 4):
        raise ValueError(f"x0 must be ({N}, 4), got {x0.shape}")
    U = np.zeros((T, N, 2)) if U_init is None else np.array(U_init, dtype=float)
    if U.shape != (T, N, 2):
        raise ValueError(f"U_init must be ({T}, {N}, 2), got {U.shape}")

    ker = make_kernel(spec.packed, backend)
    Uf = U.reshape(T, 2 * N)
    xs = ker.rollout(x0.reshape(-1), Uf)
    J = ker.cost(xs, Uf)
    history = [J]
    reg = cfg.reg_init
    converged = False
    it = 0
    while it < cfg.max_iterations:
        it += 1
        bw = ker.backward(xs, Uf, reg)
        if bw is None:
            reg *= cfg.reg_grow
            if reg > cfg.reg_max:
                break
            continue
        ks, Ks, dV = bw
        if -dV[0] <= 1e-12 * (1.0 + abs(J)):
            # no first-order descent direction left
            converged = True
            break
        for alpha in cfg.line_search:
            xn, un = ker.forward(xs, Uf, ks, Ks, alpha)
            Jn = ker.cost(xn, un)
            if Jn < J:
                break
        else:
            reg *= cfg.reg_grow
            if reg > cfg.reg_max:
                break
            continue
        rel = (J - Jn) / max(abs(J), 1e-300)
        xs, Uf, J = xn, un, Jn
        history.append(J)
        reg = max(reg / cfg.reg_shrink, cfg.reg_init)
        if rel < cfg.tol:
            converged = True
            break
    return JointPlan(U=Uf.reshape(T, N, 2), xs=xs.reshape(T + 1, N, 4), cost=J,
                     converged=converged, iterations=it, cost_history=history)


def solve_best(x0, spec: GameSpec, inits, cfg: SolverConfig = SolverConfig()) -> JointPlan:
    """Solve from each initial guess in turn and keep the cheapest plan (first wins ties)."""
    best = None
    for U0 in inits:
        plan = solve(x0, spec, U0, cfg)
        if best is None or plan.cost < best.cost:
            best = plan
    if best is None:
        raise ValueError("at least one initial guess is required")
    return best
