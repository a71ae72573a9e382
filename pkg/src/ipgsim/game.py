"""Per-agent observation and imagined-game construction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .costs import HORIZON, W_BOX, W_OBS, AgentParams, GameSpec, Movers
from .dynamics import TS
from .geometry import line_of_sight
from .scenarios import Scenario
from .solver import shift_plan


@dataclass(frozen=True, eq=False)
class Observation:
    """What one agent sees: itself plus the agents it can observe, with their true goals."""

    ego: int
    agents: tuple[int, ...]        # global indices, ascending, always containing ego
    states: np.ndarray             # (k, 4), rows follow ``agents``
    goals: tuple[AgentParams, ...]  # ground-truth params of the observed agents (goals are used)
    obstacles: tuple = ()
    workspace: tuple | None = None
    parked: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))  # (P, 2) arrived agents in view
    parked_agents: tuple[int, ...] = ()

    @property
    def ego_slot(self) -> int:
        return self.agents.index(self.ego)

    @property
    def others(self) -> tuple[int, ...]:
        return tuple(a for a in self.agents if a != self.ego)


def can_see(world: np.ndarray, ego: int, j: int, scenario: Scenario) -> bool:
    pe, pj = world[ego, :2], world[j, :2]
    if not line_of_sight(scenario.obstacles, pe, pj):
        return False
    th = world[ego, 2]
    behind = math.cos(th) * (pj[0] - pe[0]) + math.sin(th) * (pj[1] - pe[1]) < 0.0
    far = math.hypot(pj[0] - pe[0], pj[1] - pe[1]) > scenario.params[ego].sensing_range
    return not (behind and far)


def observe(world, ego: int, scenario: Scenario, arrived=None) -> Observation:
    """Agents visible to ``ego``; those flagged in ``arrived`` are reported as parked."""
    world = np.asarray(world, dtype=float)
    if not 0 <= ego < scenario.n_agents:
        raise IndexError(f"no agent {ego}")
    arrived = [False] * scenario.n_agents if arrived is None else list(arrived)
    seen = [j for j in range(scenario.n_agents) if j == ego or can_see(world, ego, j, scenario)]
    active = tuple(j for j in seen if j == ego or not arrived[j])
    parked = tuple(j for j in seen if j != ego and arrived[j])
    return Observation(
        ego=ego, agents=active, states=world[list(active)].copy(),
        goals=tuple(scenario.params[j] for j in active),
        obstacles=scenario.obstacles, workspace=scenario.workspace,
        parked=world[list(parked), :2].reshape(-1, 2).copy(), parked_agents=parked,
    )


def parked_movers(positions, horizon: int, d_safe, weight) -> Movers | None:
    """Stationary agents as moving obstacles that hold their position."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    P = positions.shape[0]
    if P == 0:
        return None
    return Movers(np.repeat(positions[None], horizon + 1, axis=0),
                  np.broadcast_to(np.asarray(d_safe, dtype=float), (P,)).copy(),
                  np.broadcast_to(np.asarray(weight, dtype=float), (P,)).copy())


def build_imagined_game(obs: Observation, ego_params: AgentParams, horizon: int = HORIZON,
                        Ts: float = TS, w_obs: float = W_OBS, w_box: float = W_BOX) -> GameSpec:
    """The game the ego agent solves: everyone gets the ego's weights and safety radius."""
    params = tuple(
        ego_params if j == obs.ego else replace(ego_params, goal=p.goal, goal_theta=p.goal_theta, goal_v=p.goal_v)
        for j, p in zip(obs.agents, obs.goals)
    )
    k = len(params)
    return GameSpec(
        params=params,
        d_safe=np.full((k, k), ego_params.r),
        pair_weight=np.full((k, k), ego_params.D),
        obstacles=obs.obstacles, workspace=obs.workspace,
        horizon=horizon, Ts=Ts, w_obs=w_obs, w_box=w_box,
        movers=parked_movers(obs.parked, horizon, ego_params.r, ego_params.D),
    )


def centralized_game(scenario: Scenario, horizon: int = HORIZON, Ts: float = TS,
                     w_obs: float = W_OBS, w_box: float = W_BOX, players=None,
                     parked_positions=None) -> GameSpec:
    """Game over ``players`` (default: everyone) with their true parameters.

    Each pair uses the larger of the two radii. Parked agents at
    ``parked_positions`` keep the largest radius and weight in the scenario.
    """
    players = tuple(range(scenario.n_agents)) if players is None else tuple(players)
    params = tuple(scenario.params[i] for i in players)
    r = np.array([p.r for p in params])
    D = np.array([p.D for p in params])
    r_all = max(p.r for p in scenario.params)
    D_all = max(p.D for p in scenario.params)
    return GameSpec(
        params=params,
        d_safe=np.maximum.outer(r, r),
        pair_weight=np.maximum.outer(D, D),
        obstacles=scenario.obstacles, workspace=scenario.workspace,
        horizon=horizon, Ts=Ts, w_obs=w_obs, w_box=w_box,
        movers=parked_movers(np.zeros((0, 2)) if parked_positions is None else parked_positions,
                             horizon, r_all, D_all),
    )


class PlanCache:
    """An agent's previous joint plan, used to warm-start its next solve."""

    def __init__(self):
        self.agents: tuple[int, ...] | None = None
        self.U: np.ndarray | None = None

    def store(self, agents, U) -> None:
        self.agents = tuple(agents)
        self.U = np.array(U, dtype=float)

    def warm_start(self, agents, horizon: int) -> np.ndarray:
        """Previous plan shifted one step, re-indexed to ``agents``; unseen agents start at zero."""
        agents = tuple(agents)
        U = np.zeros((horizon, len(agents), 2))
        if self.U is None or self.U.shape[0] != horizon:
            return U
        shifted = shift_plan(self.U)
        for slot, a in enumerate(agents):
            if a in self.agents:
                U[:, slot] = shifted[:, self.agents.index(a)]
        return U
