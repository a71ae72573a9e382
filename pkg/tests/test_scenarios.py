from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipgsim.costs import AgentParams
from ipgsim.game import observe
from ipgsim.geometry import Circle, Rect, clearance, line_of_sight
from ipgsim.scenarios import (R_RANGE, Scenario, make_narrow_way, make_open_area, make_t_intersection,
                              narrow_way_scenario, random_narrow_way_suite, t_intersection_scenario)


def test_narrow_way_geometry():
    walls, ws = make_narrow_way(width=2.0, length=6.0)
    assert len(walls) == 2
    for w in walls:
        assert w.xmax - w.xmin == pytest.approx(6.0)
    assert walls[0].ymin - walls[1].ymax == pytest.approx(2.0)
    assert clearance(walls, 0.0, 0.0) == pytest.approx(1.0)


@settings(max_examples=60)
@given(st.floats(-2.9, 2.9), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_segment_across_corridor_hits_walls_iff_it_leaves_the_gap(x, y0, y1):
    walls, _ = make_narrow_way(width=2.0, length=6.0)
    inside = max(abs(y0), abs(y1)) < 1.0  # touching the wall surface counts as hitting it
    assert line_of_sight(walls, (x, y0), (x, y1)) == inside


def test_narrow_way_rejects_wide_corridor():
    with pytest.raises(ValueError):
        make_narrow_way(width=7.0, room_depth=6.0)


def test_t_intersection_occludes_until_the_junction():
    sc = t_intersection_scenario()
    assert make_t_intersection() == make_t_intersection()
    world = sc.x0.copy()
    assert observe(world, 0, sc).others == () and observe(world, 1, sc).others == ()
    world[0, :2] = [0.0, -0.1]
    world[1, :2] = [-0.5, 0.1]
    assert observe(world, 0, sc).others == (1,) and observe(world, 1, sc).others == (0,)


def test_open_area():
    sc = make_open_area(3, (1.2, 1.5, 2.0))
    assert sc.n_agents == 3 and sc.obstacles == ()
    assert [p.r for p in sc.params] == [1.2, 1.5, 2.0]
    np.testing.assert_allclose(sc.goals, -sc.x0[:, :2], atol=1e-12)
    one = make_open_area(1, (1.5,))
    assert one.n_agents == 1 and np.allclose(one.goals[0], -one.x0[0, :2])


def test_suite_is_seeded_and_in_range():
    a = random_narrow_way_suite(5, seed=3)
    b = random_narrow_way_suite(5, seed=3)
    assert [s.to_dict() for s in a] == [s.to_dict() for s in b]
    assert [s.to_dict() for s in a] != [s.to_dict() for s in random_narrow_way_suite(5, seed=4)]
    for sc in a:
        for p in sc.params:
            assert R_RANGE[0] <= p.r <= R_RANGE[1]
        # agent 0 left to right, agent 1 the reverse
        assert sc.x0[0, 0] < 0 < sc.params[0].goal[0]
        assert sc.x0[1, 0] > 0 > sc.params[1].goal[0]
    with pytest.raises(ValueError):
        random_narrow_way_suite(0)


def test_scenario_round_trip():
    for sc in (narrow_way_scenario(), t_intersection_scenario(), make_open_area(3),
               random_narrow_way_suite(1, seed=9)[0]):
        back = Scenario.from_dict(sc.to_dict())
        assert back.to_dict() == sc.to_dict()
        assert back.params == sc.params and back.obstacles == sc.obstacles
        assert np.array_equal(back.x0, sc.x0)


def test_validation_rejects_bad_starts():
    p = AgentParams(goal=(5.0, 0.0))
    with pytest.raises(ValueError):
        Scenario("x", np.array([[0, 0, 0, 0], [0.2, 0, 0, 0]]), (p, p)).validate()
    with pytest.raises(ValueError):
        Scenario("x", np.array([[0, 0, 0, 0]]), (p,), (Circle(0, 0, 1.0),)).validate()
    with pytest.raises(ValueError):
        Scenario("x", np.array([[0, 0, 0, 0]]), (AgentParams(goal=(0.0, 9.0)),), (),
                 (-1, -1, 1, 1)).validate()
    with pytest.raises(ValueError):
        Rect(0, 0, 0, 1)
    with pytest.raises(ValueError):
        Circle(0, 0, -1)


def test_mid_corridor_clearance_is_half_width():
    for width in (1.0, 1.6, 2.0):
        walls, _ = make_narrow_way(width=width)
        assert clearance(walls, 0.0, 0.0) == pytest.approx(width / 2)
        assert math.isclose(clearance(walls, 1.0, 0.0), width / 2)
