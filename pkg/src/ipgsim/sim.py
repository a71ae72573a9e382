"""Closed-loop simulation: snapshot, per-agent decisions, synchronous update, termination."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import dynamics
from .costs import W_BOX, W_OBS
from .game import PlanCache, observe
from .geometry import clearance
from .policies import DECIDERS, AgentDecision, PolicyKind, brake_control, centralized_decide
from .scenarios import Scenario
from .solver import SolverConfig

log = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    """The world state became non-finite (a solver blew up)."""


@dataclass(frozen=True)
class SimConfig:
    Ts: float = dynamics.TS
    max_steps: int = 600
    goal_tolerance: float = 0.3
    r_collision: float = 0.5
    wall_contact: float = 0.0     # a wall is hit when an agent's centre gets closer than this
    seed: int = 0
    w_obs: float = W_OBS
    w_box: float = W_BOX
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if min(self.Ts, self.max_steps, self.goal_tolerance, self.r_collision) <= 0 or self.wall_contact < 0:
            raise ValueError("simulation settings must be positive")


class OutcomeKind(str, Enum):
    SUCCESS = "Success"
    COLLISION = "Collision"
    DEADLOCK = "Deadlock"


@dataclass(frozen=True)
class Outcome:
    kind: OutcomeKind
    completion_times: tuple[float | None, ...]  # per agent, seconds
    total_time: float | None                     # last arrival, seconds (Success only)
    collision_step: int | None = None


@dataclass
class SimTrace:
    scenario: Scenario
    assignment: tuple[PolicyKind, ...]
    cfg: SimConfig
    states: np.ndarray                       # (S + 1, N, 4)
    controls: np.ndarray                     # (S, N, 2)
    decisions: list[list[AgentDecision]]     # per step, per agent
    arrival_steps: list[int | None]
    outcome: Outcome

    @property
    def n_steps(self) -> int:
        return self.controls.shape[0]


def _arrived(x, goal, cfg: SimConfig) -> bool:
    return math.hypot(x[0] - goal[0], x[1] - goal[1]) <= cfg.goal_tolerance


def _in_collision(world: np.ndarray, scenario: Scenario, cfg: SimConfig) -> bool:
    n = world.shape[0]
    for i in range(n):
        if clearance(scenario.obstacles, world[i, 0], world[i, 1]) < cfg.wall_contact:
            return True
        for j in range(i + 1, n):
            if math.hypot(world[i, 0] - world[j, 0], world[i, 1] - world[j, 1]) < cfg.r_collision:
                return True
    return False


def classify(states: np.ndarray, scenario: Scenario, cfg: SimConfig) -> tuple[Outcome, list[int | None]]:
    """Outcome of a state sequence under the run termination rules.

    Arrival is latched at the first step an agent is within tolerance of its
    goal; from then on the agent only brakes to rest.
    """
    arrivals: list[int | None] = [None] * scenario.n_agents
    goals = scenario.goals
    for s, world in enumerate(states):
        if _in_collision(world, scenario, cfg):
            return Outcome(OutcomeKind.COLLISION, tuple(None if a is None else a * cfg.Ts for a in arrivals),
                           None, s), arrivals
        for i in range(scenario.n_agents):
            if arrivals[i] is None and _arrived(world[i], goals[i], cfg):
                arrivals[i] = s
        if all(a is not None for a in arrivals):
            times = tuple(a * cfg.Ts for a in arrivals)
            return Outcome(OutcomeKind.SUCCESS, times, max(arrivals) * cfg.Ts), arrivals
    return Outcome(OutcomeKind.DEADLOCK, tuple(None if a is None else a * cfg.Ts for a in arrivals),
                   None), arrivals


def resolve_threads(threads: int | None = None) -> int:
    if threads is not None:
        return max(int(threads), 0)
    try:
        return max(int(os.environ.get("IPG_THREADS", "0")), 0)
    except ValueError:
        return 0


def run(scenario: Scenario, assignment: Sequence[PolicyKind | str] | PolicyKind | str,
        cfg: SimConfig = SimConfig(), threads: int | None = None) -> SimTrace:
    """Closed-loop run of ``scenario`` with one policy per agent.

    A single :attr:`PolicyKind.CENTRALIZED` (or one per agent) runs the
    centralized oracle instead. ``threads`` (default: ``IPG_THREADS``) bounds
    concurrent per-agent solves; it never changes the result.
    """
    n = scenario.n_agents
    if isinstance(assignment, (str, PolicyKind)):
        assignment = [assignment] * n
    kinds = tuple(PolicyKind.parse(a) if isinstance(a, str) else PolicyKind(a) for a in assignment)
    if len(kinds) == 1:
        kinds = kinds * n
    if len(kinds) != n:
        raise ValueError(f"{len(kinds)} policies for {n} agents")
    centralized = PolicyKind.CENTRALIZED in kinds
    if centralized and any(k is not PolicyKind.CENTRALIZED for k in kinds):
        raise ValueError("the centralized oracle controls every agent")

    caches = [PlanCache() for _ in range(n)]
    world = scenario.x0.copy()
    states = [world.copy()]
    controls, decisions = [], []
    goals = scenario.goals
    arrived = [_arrived(world[i], goals[i], cfg) for i in range(n)]
    n_threads = resolve_threads(threads)
    pool = ThreadPoolExecutor(max_workers=n_threads) if n_threads > 0 and not centralized else None

    def decide(i: int, snapshot: np.ndarray) -> AgentDecision:
        if arrived[i]:
            return AgentDecision(brake_control(snapshot[i], scenario.params[i], cfg.Ts))
        obs = observe(snapshot, i, scenario, arrived)
        return DECIDERS[kinds[i]](obs, scenario.params[i], caches[i], cfg)

    try:
        for s in range(cfg.max_steps):
            snapshot = world.copy()
            snapshot.setflags(write=False)
            if all(arrived):
                break
            if centralized:
                step_decisions = centralized_decide(snapshot, scenario, caches[0], cfg, arrived)
            elif pool is not None:
                step_decisions = list(pool.map(lambda i: decide(i, snapshot), range(n)))
            else:
                step_decisions = [decide(i, snapshot) for i in range(n)]
            u = np.array([d.control for d in step_decisions])
            nxt = np.array([dynamics.step(snapshot[i], u[i], cfg.Ts, scenario.params[i].v_lo,
                                          scenario.params[i].v_hi) for i in range(n)])
            if not np.all(np.isfinite(nxt)):
                raise SimulationError(f"non-finite state at step {s + 1}")
            world = nxt
            states.append(world.copy())
            controls.append(u)
            decisions.append(step_decisions)
            if _in_collision(world, scenario, cfg):
                break
            for i in range(n):
                if not arrived[i] and _arrived(world[i], goals[i], cfg):
                    arrived[i] = True
            if all(arrived):
                break
    except dynamics.NonFiniteStateError as exc:
        raise SimulationError(str(exc)) from exc
    finally:
        if pool is not None:
            pool.shutdown()

    states_arr = np.array(states)
    outcome, arrivals = classify(states_arr, scenario, cfg)
    log.debug("%s %s -> %s after %d steps", scenario.name, [k.value for k in kinds],
              outcome.kind.value, len(controls))
    return SimTrace(scenario, kinds, cfg, states_arr, np.array(controls).reshape(-1, n, 2),
                    decisions, arrivals, outcome)
