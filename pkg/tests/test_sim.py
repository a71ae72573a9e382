from __future__ import annotations

import math

import numpy as np
import pytest

from ipgsim.costs import AgentParams
from ipgsim.geometry import Rect
from ipgsim.scenarios import Scenario, make_narrow_way
from ipgsim.sim import OutcomeKind, SimConfig, classify, resolve_threads, run

from oracles import euler_step


def hallway(gap: float = 4.0) -> Scenario:
    walls, ws = make_narrow_way()
    x0 = np.array([[-gap / 2, 0, 0, 0], [gap / 2, 0, math.pi, 0]], dtype=float)
    params = (AgentParams(goal=(6, 0), r=1.5), AgentParams(goal=(-6, 0), r=1.5))
    return Scenario("hall", x0, params, walls, ws).validate()


def solo() -> Scenario:
    return Scenario("solo", np.array([[0, 0, 0, 0.0]]), (AgentParams(goal=(3, 0)),), (), (-5, -5, 5, 5))


def test_single_agent_reaches_goal():
    tr = run(solo(), "ipg")
    assert tr.outcome.kind is OutcomeKind.SUCCESS
    assert tr.outcome.total_time == pytest.approx(tr.n_steps * 0.1)
    assert np.hypot(*(tr.states[-1, 0, :2] - (3, 0))) <= 0.3


def test_ignore_head_on_collides():
    tr = run(hallway(), "ignore", SimConfig(max_steps=150))
    assert tr.outcome.kind is OutcomeKind.COLLISION
    assert tr.outcome.collision_step == tr.n_steps


def test_brake_head_on_deadlocks():
    tr = run(hallway(), "brake", SimConfig(max_steps=150))
    assert tr.outcome.kind is OutcomeKind.DEADLOCK
    assert tr.n_steps == 150
    assert tr.outcome.total_time is None


def test_trace_replays_through_dynamics():
    tr = run(hallway(), "ignore", SimConfig(max_steps=150))
    for s in range(tr.n_steps):
        for i in range(2):
            assert np.allclose(tr.states[s + 1, i], euler_step(tr.states[s, i], tr.controls[s, i], 0.1),
                               rtol=0, atol=1e-12)


def test_threads_do_not_change_result():
    a = run(hallway(), "ipg", SimConfig(max_steps=40), threads=0)
    b = run(hallway(), "ipg", SimConfig(max_steps=40), threads=4)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.controls, b.controls)


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("IPG_THREADS", "3")
    assert resolve_threads() == 3
    assert resolve_threads(0) == 0
    monkeypatch.setenv("IPG_THREADS", "junk")
    assert resolve_threads() == 0


def test_classify_synthetic():
    sc = hallway()
    cfg = SimConfig()
    # both agents jump straight to their goals at step 2
    states = np.array([sc.x0, sc.x0, [[6, 0, 0, 0], [-6, 0, math.pi, 0]]], dtype=float)
    out, arrivals = classify(states, sc, cfg)
    assert out.kind is OutcomeKind.SUCCESS and arrivals == [2, 2]
    assert out.total_time == pytest.approx(0.2)
    # closer than r_collision
    near = np.array([sc.x0, [[0, 0, 0, 0], [0.49, 0, 0, 0]]], dtype=float)
    out, _ = classify(near, sc, cfg)
    assert out.kind is OutcomeKind.COLLISION and out.collision_step == 1
    # exactly r_collision apart is not a collision
    out, _ = classify(np.array([[[0, 0, 0, 0], [0.5, 0, 0, 0]]], dtype=float), sc, cfg)
    assert out.kind is OutcomeKind.DEADLOCK


def test_wall_penetration_is_collision():
    sc = hallway()
    inside_wall = np.array([sc.x0, [[0, 0.7, 0, 0], [2, 0, math.pi, 0]]], dtype=float)
    out, _ = classify(inside_wall, sc, SimConfig())
    assert out.kind is OutcomeKind.COLLISION
    grazing = np.array([sc.x0, [[0, 0.4, 0, 0], [2, 0, math.pi, 0]]], dtype=float)
    assert classify(grazing, sc, SimConfig())[0].kind is OutcomeKind.DEADLOCK
    assert classify(grazing, sc, SimConfig(wall_contact=0.25))[0].kind is OutcomeKind.COLLISION


def test_arrival_is_latched():
    sc = Scenario("latch", np.array([[0, 0, 0, 0.0]]), (AgentParams(goal=(1, 0)),), (Rect(5, 5, 6, 6),))
    states = np.array([[[0, 0, 0, 0]], [[1, 0, 0, 0]], [[3, 0, 0, 0]]], dtype=float)
    out, arrivals = classify(states, sc, SimConfig())
    assert arrivals == [1] and out.kind is OutcomeKind.SUCCESS


def test_bad_config_rejected():
    with pytest.raises(ValueError):
        SimConfig(Ts=0)
    with pytest.raises(ValueError):
        SimConfig(wall_contact=-0.1)


def test_assignment_length_checked():
    with pytest.raises(ValueError):
        run(hallway(), ["ipg", "ipg", "ipg"])
    with pytest.raises(ValueError):
        run(hallway(), ["centralized", "ipg"])
