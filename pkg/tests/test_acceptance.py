"""Acceptance criteria, one test each; every test records a PASS/FAIL line."""

from __future__ import annotations

import math

import numpy as np
import pytest

from ipgsim import costs, dynamics
from ipgsim.bench import CENTRALIZED, run_suite
from ipgsim.cli import main
from ipgsim.costs import AgentParams, GameSpec
from ipgsim.game import can_see
from ipgsim.geometry import Circle
from ipgsim.scenarios import narrow_way_scenario, random_narrow_way_suite, t_intersection_scenario
from ipgsim.sim import OutcomeKind, SimConfig, run
from ipgsim.solver import SolverConfig, goal_seeking_guess, solve

from conftest import ACCEPTANCE_LINES
from oracles import (central_diff, euler_step, joint_rollout, potential_gradient, random_game,
                     random_instance, rel_err)

SUITE_POLICIES = ("ipg", "vanilla", "brake")


def record(n: int, ok: bool, text: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} criterion {n}: {text}")
    assert ok, text


@pytest.fixture(scope="module")
def suite_report():
    return run_suite(random_narrow_way_suite(20, seed=0), SUITE_POLICIES, SimConfig())


# -- 1, 2, 10: randomized narrow-way suite -------------------------------------------

def test_criterion_1_suite_outcomes(suite_report):
    c = {p: suite_report.counts(p) for p in SUITE_POLICIES}
    ok = (c["ipg"]["Success"] >= 19 and c["ipg"]["Collision"] == 0
          and c["ipg"]["Success"] > c["vanilla"]["Success"] and c["ipg"]["Success"] > c["brake"]["Success"]
          and c["brake"]["Collision"] == 0 and c["brake"]["Deadlock"] >= 3
          and c["vanilla"]["Collision"] >= 1)
    summary = ", ".join(f"{p} {c[p]['Success']}/20 S {c[p]['Deadlock']} D {c[p]['Collision']} C"
                        for p in SUITE_POLICIES)
    record(1, ok, f"narrow-way suite outcomes ({summary})")


def test_criterion_2_aet_ordering(suite_report):
    aet = {p: suite_report.aet(p) for p in SUITE_POLICIES}
    ok = (aet["ipg"] is not None and all(aet[p] is not None for p in ("vanilla", "brake"))
          and aet["ipg"] < aet["vanilla"] and aet["ipg"] < aet["brake"] and aet["ipg"] <= 1.0)
    text = ", ".join(f"{p} {'n/a' if v is None else f'{v:+.3f} s'}" for p, v in aet.items())
    record(2, ok, f"average extra time ordering ({text})")


def test_criterion_10_safety_invariant(suite_report):
    cfg = SimConfig()
    ok_runs = [r for r in suite_report.results if r.outcome == OutcomeKind.SUCCESS.value]
    d = min(r.min_distance for r in ok_runs)
    c = min(r.min_clearance for r in ok_runs)
    record(10, d >= cfg.r_collision and c >= 0,
           f"over {len(ok_runs)} successful runs min distance {d:.3f} m, min obstacle clearance {c:.3f} m")


# -- 3, 4: derivatives ---------------------------------------------------------------

def test_criterion_3_potential_game_gradients():
    rng = np.random.default_rng(3)
    worst = 0.0
    for t in range(100):
        spec = random_game(rng, 2 + t % 2, 8, movers=t % 3 == 0)
        x0, U = random_instance(rng, spec)
        g = potential_gradient(x0, U, spec)
        for i in range(spec.n_agents):
            def J(Ui, i=i):
                V = U.copy()
                V[:, i] = Ui
                return costs.agent_cost(i, joint_rollout(x0, V, spec), V, spec)
            worst = max(worst, rel_err(central_diff(J, U[:, i], 1e-6), g[:, i]))
    record(3, worst <= 1e-6, f"own-cost vs potential gradients on 100 games, worst relative error {worst:.2e}")


def test_criterion_4_derivatives():
    rng = np.random.default_rng(4)
    worst_q = 0.0
    for t in range(100):
        spec = random_game(rng, 2 + t % 2, 5, movers=t % 2 == 1)
        x0, U = random_instance(rng, spec)
        xs = joint_rollout(x0, U, spec)
        lx, lu, *_ = costs.quadratize(xs, U, spec)
        fx = central_diff(lambda z: costs.potential(z, U, spec), xs, 1e-6)
        fu = central_diff(lambda z: costs.potential(xs, z, spec), U, 1e-6)
        worst_q = max(worst_q, rel_err(lx.reshape(fx.shape), fx), rel_err(lu.reshape(fu.shape), fu))
    worst_l = 0.0
    for _ in range(100):
        x = np.concatenate([rng.uniform(-5, 5, 2), rng.uniform(-math.pi, math.pi, 1), rng.uniform(-1.4, 1.9, 1)])
        u = rng.uniform(-0.4, 0.4, 2)   # keeps the speed update away from its clamp
        A, B = dynamics.linearize(x, u)
        for k in range(4):
            fa = central_diff(lambda z: dynamics.step(z, u)[k], x, 1e-6)
            fb = central_diff(lambda z: dynamics.step(x, z)[k], u, 1e-6)
            worst_l = max(worst_l, rel_err(A[k], fa), rel_err(B[k], fb))
    record(4, worst_q <= 1e-4 and worst_l <= 1e-6,
           f"quadratize worst relative error {worst_q:.2e}, linearize {worst_l:.2e}")


# -- 5: solver properties ------------------------------------------------------------

def _lane_instance(rng, n, T=30):
    """Agents on parallel lanes driving forward past one small obstacle."""
    params, x0 = [], []
    for i in range(n):
        y = 1.3 * i + rng.uniform(-0.2, 0.2)
        x = rng.uniform(-0.5, 0.5)
        x0.append([x, y, rng.uniform(-0.2, 0.2), rng.uniform(0.4, 0.8)])
        params.append(AgentParams(goal=(x + rng.uniform(2.0, 3.0), y + rng.uniform(-0.3, 0.3)),
                                  Q=tuple(rng.uniform(0.5, 1.5, 2)) + (0.0, 0.0), R=tuple(rng.uniform(0.5, 2, 2)),
                                  D=float(rng.uniform(20, 60)), B=float(rng.uniform(5, 15)),
                                  r=float(rng.uniform(1.2, 2.0))))
    r = np.array([p.r for p in params])
    D = np.array([p.D for p in params])
    obs = (Circle(rng.uniform(1, 2), -1.3 + rng.uniform(-0.3, 0.3), 0.3),)
    return np.array(x0), GameSpec(tuple(params), np.maximum.outer(r, r), obs, T,
                                  pair_weight=np.maximum.outer(D, D))


def _projected(g, U):
    g = g.copy()
    g[(U >= 2.0) & (g < 0)] = 0.0
    g[(U <= -2.0) & (g > 0)] = 0.0
    return g


def test_criterion_5_solver_properties():
    rng = np.random.default_rng(5)
    monotone = True
    for t in range(50):
        spec = random_game(rng, 1 + t % 3, 15, movers=t % 2 == 0)
        x0, U = random_instance(rng, spec)
        h = solve(x0, spec, U, SolverConfig(horizon=15)).cost_history
        monotone &= all(b <= a for a, b in zip(h, h[1:]))

    T = 20
    tight = SolverConfig(tol=1e-12, max_iterations=500, horizon=T)
    ps = (AgentParams(goal=(2.0, 1.0)), AgentParams(goal=(98.0, -1.0)))
    spec = GameSpec(params=ps, d_safe=np.full((2, 2), 1.5), horizon=T)
    x0 = np.array([[0.0, 0.0, 0.0, 0.0], [100.0, 0.0, math.pi, 0.0]])
    U0 = goal_seeking_guess(x0, spec)
    joint = solve(x0, spec, U0, tight)
    decouple = max(np.abs(joint.U[:, i] - solve(x0[i:i + 1], GameSpec((ps[i],), np.zeros((1, 1)), horizon=T),
                                                 U0[:, i:i + 1], tight).U[:, 0]).max() for i in range(2))

    nash_cfg = SolverConfig(max_iterations=500, tol=1e-12, horizon=30)
    worst, smooth = 0.0, True
    for t in range(20):
        x0, spec = _lane_instance(rng, 2 + t % 2)
        plan = solve(x0, spec, goal_seeking_guess(x0, spec), nash_cfg)
        v = plan.xs[:, :, 3]
        # stationarity is only defined away from the speed clamp and the reversing kink at v = 0
        smooth &= bool(v.min() > 0.0 and v.max() < 2.0)
        g = _projected(potential_gradient(x0, plan.U, spec), plan.U)
        worst = max(worst, max(np.linalg.norm(g[:, i]) for i in range(spec.n_agents)))
    ok = monotone and decouple <= 1e-6 and worst <= 1e-3 and smooth
    record(5, ok, f"monotone cost on 50 solves {monotone}, decoupling gap {decouple:.1e}, "
                  f"worst projected Nash gradient {worst:.1e} on 20 games (smooth regime {smooth})")


# -- 6: dynamics ---------------------------------------------------------------------

def test_criterion_6_dynamics_exact():
    examples = [([0, 0, 0, 1], [0, 0], [0.1, 0, 0, 1]),
                ([1, 2, math.pi / 2, 2], [0, 0], [1, 2.2, math.pi / 2, 2]),
                ([0, 0, 0, 0], [1, 0.5], [0, 0, 0.05, 0.1])]
    worst = max(np.abs(dynamics.step(x, u, 0.1) - np.array(e)).max() for x, u, e in examples)
    rng = np.random.default_rng(6)
    for _ in range(1000):
        x = np.concatenate([rng.uniform(-10, 10, 3), rng.uniform(-2, 2.5, 1)])
        u = rng.uniform(-2, 2, 2)
        worst = max(worst, np.abs(dynamics.step(x, u, 0.1) - np.array(euler_step(x, u, 0.1))).max())
    record(6, worst <= 1e-12, f"step vs hand Euler on 3 examples and 1000 samples, worst error {worst:.1e}")


# -- 7: determinism ------------------------------------------------------------------

def test_criterion_7_determinism(tmp_path, monkeypatch):
    files = {"run": ("trace.csv", "plans.jsonl", "summary.json"), "bench": ("report.txt", "cases.csv", "report.json")}
    outs = {}
    for threads in ("0", "4"):
        monkeypatch.setenv("IPG_THREADS", threads)
        for rep in range(2):
            d = tmp_path / f"t{threads}_{rep}"
            main(["run", "narrow_way", "--policy", "ipg", "--seed", "1", "--out", str(d / "run")])
            main(["bench", "--cases", "2", "--seed", "1", "--out", str(d / "bench")])
            outs[(threads, rep)] = {(k, f): (d / k / f).read_bytes() for k, fs in files.items() for f in fs}
    first = outs[("0", 0)]
    ok = all(o == first for o in outs.values())
    record(7, ok, "run and suite files byte-identical across repeats with IPG_THREADS 0 and 4")


# -- 8, 9: qualitative runs ----------------------------------------------------------

def _reversal_after_sighting(trace) -> bool:
    sc, S = trace.scenario, trace.states
    for i in range(sc.n_agents):
        for j in range(sc.n_agents):
            if i == j:
                continue
            seen = next((s for s in range(len(S)) if can_see(S[s], i, j, sc)), None)
            if seen is None:
                continue
            run_len = 0
            for s in range(seen, len(S)):
                run_len = run_len + 1 if S[s, i, 3] < 0 else 0
                if run_len >= 3:
                    return True
    return False


def test_criterion_8_t_intersection():
    tr = run(t_intersection_scenario(), "ipg")
    ok = tr.outcome.kind is OutcomeKind.SUCCESS and _reversal_after_sighting(tr)
    record(8, ok, f"T-intersection IPG run {tr.outcome.kind.value} with reversal after sighting "
                  f"{_reversal_after_sighting(tr)}")


def test_criterion_9_heterogeneous():
    outcomes = {}
    for pair in (("ipg", "ignore"), ("ignore", "ipg"), ("ipg", "vanilla"), ("vanilla", "ipg")):
        outcomes["/".join(pair)] = run(narrow_way_scenario(), list(pair)).outcome.kind.value
    ok = all(o != OutcomeKind.COLLISION.value for o in outcomes.values())
    record(9, ok, "mixed narrow-way runs " + ", ".join(f"{k} {v}" for k, v in outcomes.items()))
