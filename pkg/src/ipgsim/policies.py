"""Per-step decision rules: IPG, Vanilla, Brake, Ignore and the centralized oracle.

Every policy receives a frozen snapshot and its own :class:`PlanCache`, so
decisions for different agents can be computed in any order or concurrently.
``cfg`` is a :class:`ipgsim.sim.SimConfig`.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .costs import AgentParams, GameSpec, Movers
from .game import Observation, PlanCache, build_imagined_game, centralized_game
from .geometry import clearance
from .scenarios import Scenario
from .solver import JointPlan, initial_guesses, shift_plan, solve_best


class PolicyKind(str, Enum):
    IPG = "ipg"
    VANILLA = "vanilla"
    BRAKE = "brake"
    IGNORE = "ignore"
    CENTRALIZED = "centralized"

    @classmethod
    def parse(cls, name: str) -> "PolicyKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown policy {name!r}; choose from {[k.value for k in cls]}") from None


@dataclass
class AgentDecision:
    control: np.ndarray                  # (2,) applied control
    plan: JointPlan | None = None        # solved plan the control came from
    agents: tuple[int, ...] = ()         # global agent index of each plan column
    feasible: bool = True
    predictions: np.ndarray | None = None  # (T+1, P, 2) constant-velocity forecasts, if any
    predicted_agents: tuple[int, ...] = ()

    def planned_positions(self) -> dict[int, np.ndarray]:
        """Planned (ego) and predicted (others) position sequences keyed by agent index."""
        out = {}
        if self.plan is not None:
            for slot, a in enumerate(self.agents):
                out[a] = self.plan.xs[:, slot, :2]
        if self.predictions is not None:
            for slot, a in enumerate(self.predicted_agents):
                out.setdefault(a, self.predictions[:, slot])
        return out


def clamp_control(u, p: AgentParams) -> np.ndarray:
    return np.minimum(np.maximum(np.asarray(u, dtype=float), p.u_lo), p.u_hi)


def brake_control(x, p: AgentParams, Ts: float) -> np.ndarray:
    """Strongest admissible deceleration toward zero speed, no turning."""
    return clamp_control([-x[3] / Ts, 0.0], p)


def _solve_game(obs_states, spec: GameSpec, agents, cache: PlanCache, cfg) -> JointPlan:
    U0 = cache.warm_start(agents, spec.horizon)
    return solve_best(obs_states, spec, initial_guesses(obs_states, spec, U0), cfg.solver)


def ipg_decide(obs: Observation, ego_params: AgentParams, cache: PlanCache, cfg) -> AgentDecision:
    spec = build_imagined_game(obs, ego_params, cfg.solver.horizon, cfg.Ts, cfg.w_obs, cfg.w_box)
    plan = _solve_game(obs.states, spec, obs.agents, cache, cfg)
    cache.store(obs.agents, plan.U)
    u = clamp_control(plan.U[0, obs.ego_slot], ego_params)
    return AgentDecision(u, plan, obs.agents, True)


def constant_velocity_predictions(states: np.ndarray, horizon: int, Ts: float) -> np.ndarray:
    """Positions ``(T+1, P, 2)`` of agents holding their current heading and speed."""
    states = np.asarray(states, dtype=float).reshape(-1, 4)
    k = np.arange(horizon + 1)[:, None] * Ts
    vx = states[:, 3] * np.cos(states[:, 2])
    vy = states[:, 3] * np.sin(states[:, 2])
    return np.stack([states[:, 0] + k * vx, states[:, 1] + k * vy], axis=-1)


def _single_agent_game(obs: Observation, ego_params: AgentParams, cfg, movers: Movers | None) -> GameSpec:
    return GameSpec(
        params=(ego_params,), d_safe=np.zeros((1, 1)), obstacles=obs.obstacles,
        workspace=obs.workspace, horizon=cfg.solver.horizon, Ts=cfg.Ts,
        w_obs=cfg.w_obs, w_box=cfg.w_box, movers=movers,
    )


def plan_is_feasible(ego_xy: np.ndarray, predictions: np.ndarray, obstacles, min_dist: float) -> bool:
    """Geometric check of an ego position sequence against forecasts and obstacles."""
    if predictions.shape[1]:
        d = np.hypot(*(ego_xy[:, None, :] - predictions[: len(ego_xy)]).transpose(2, 0, 1))
        if d.min() < min_dist:
            return False
    return all(clearance(obstacles, x, y) >= 0.0 for x, y in ego_xy)


def _predictive_decide(obs: Observation, ego_params: AgentParams, cache: PlanCache, cfg,
                       brake: bool) -> AgentDecision:
    T = cfg.solver.horizon
    others = obs.others
    preds = constant_velocity_predictions(obs.states[[obs.agents.index(a) for a in others]], T, cfg.Ts)
    if len(obs.parked_agents):
        preds = np.concatenate([preds, np.repeat(obs.parked[None], T + 1, axis=0)], axis=1)
        others = others + obs.parked_agents
    # forecasts enter only through the safety-radius term; feasibility is then checked geometrically
    movers = Movers(preds, np.full(len(others), ego_params.r), np.full(len(others), ego_params.D),
                    contact=False) if others else None
    spec = _single_agent_game(obs, ego_params, cfg, movers)
    ego = (obs.ego,)
    prev = shift_plan(cache.U) if cache.U is not None and cache.U.shape[0] == T else None
    x_ego = obs.states[obs.ego_slot][None]
    U0 = prev if prev is not None else np.zeros((T, 1, 2))
    plan = solve_best(x_ego, spec, initial_guesses(x_ego, spec, U0), cfg.solver)
    feasible = plan_is_feasible(plan.xs[:, 0, :2], preds, obs.obstacles, cfg.r_collision)
    decision = AgentDecision(np.zeros(2), plan, ego, feasible, preds, others)
    if feasible:
        cache.store(ego, plan.U)
        decision.control = clamp_control(plan.U[0, 0], ego_params)
    elif brake:
        cache.store(ego, plan.U)
        decision.control = brake_control(obs.states[obs.ego_slot], ego_params, cfg.Ts)
    elif prev is not None:
        # keep following the previous plan
        cache.store(ego, prev)
        decision.control = clamp_control(prev[0, 0], ego_params)
    else:
        decision.control = clamp_control(np.zeros(2), ego_params)
    return decision


def vanilla_decide(obs: Observation, ego_params: AgentParams, cache: PlanCache, cfg) -> AgentDecision:
    return _predictive_decide(obs, ego_params, cache, cfg, brake=False)


def brake_decide(obs: Observation, ego_params: AgentParams, cache: PlanCache, cfg) -> AgentDecision:
    return _predictive_decide(obs, ego_params, cache, cfg, brake=True)


def ignore_decide(obs: Observation, ego_params: AgentParams, cache: PlanCache, cfg) -> AgentDecision:
    """Plans around static obstacles only; other agents, moving or parked, are ignored."""
    spec = _single_agent_game(obs, ego_params, cfg, None)
    ego = (obs.ego,)
    plan = _solve_game(obs.states[obs.ego_slot][None], spec, ego, cache, cfg)
    cache.store(ego, plan.U)
    return AgentDecision(clamp_control(plan.U[0, 0], ego_params), plan, ego, True)


def centralized_decide(world, scenario: Scenario, cache: PlanCache, cfg, arrived=None) -> list[AgentDecision]:
    """One joint solve for every agent still travelling; arrived agents brake in place."""
    world = np.asarray(world, dtype=float)
    arrived = [False] * scenario.n_agents if arrived is None else list(arrived)
    players = tuple(i for i in range(scenario.n_agents) if not arrived[i])
    parked = tuple(i for i in range(scenario.n_agents) if arrived[i])
    decisions = [AgentDecision(brake_control(world[i], p, cfg.Ts)) for i, p in enumerate(scenario.params)]
    if not players:
        return decisions
    spec = centralized_game(scenario, cfg.solver.horizon, cfg.Ts, cfg.w_obs, cfg.w_box,
                            players, world[list(parked), :2])
    plan = _solve_game(world[list(players)], spec, players, cache, cfg)
    cache.store(players, plan.U)
    for slot, i in enumerate(players):
        decisions[i] = AgentDecision(clamp_control(plan.U[0, slot], scenario.params[i]), plan, players, True)
    return decisions


DECIDERS = {
    PolicyKind.IPG: ipg_decide,
    PolicyKind.VANILLA: vanilla_decide,
    PolicyKind.BRAKE: brake_decide,
    PolicyKind.IGNORE: ignore_decide,
}
