from __future__ import annotations

import math

import numpy as np
import pytest

from ipgsim.bench import (CENTRALIZED, CaseResult, SuiteReport, format_aet, policy_label, report_table,
                          run_suite, trace_safety)
from ipgsim.costs import AgentParams
from ipgsim.scenarios import Scenario
from ipgsim.sim import SimConfig, run


def result(case, policy, outcome="Success", total=None):
    return CaseResult(case, "nw", policy, outcome, total, (), None, 10, 1.0, 0.5)


def test_extra_time_against_baseline():
    rep = SuiteReport(["ipg"], 1, [result(0, CENTRALIZED, total=10.0), result(0, "ipg", total=10.4)])
    assert rep.aet("ipg") == pytest.approx(0.4)
    assert rep.aet(CENTRALIZED) == 0.0
    assert "+0.400" in report_table(rep)


def test_failed_cases_carry_no_extra_time():
    rep = SuiteReport(["ipg"], 3, [
        result(0, CENTRALIZED, total=5.0), result(0, "ipg", total=6.0),
        result(1, CENTRALIZED, "Deadlock"), result(1, "ipg", total=7.0),
        result(2, CENTRALIZED, total=5.0), result(2, "ipg", "Collision"),
    ])
    assert rep.excluded_cases == [1]
    assert rep.extra_times("ipg") == {0: 1.0}
    assert rep.counts("ipg") == {"Success": 2, "Collision": 1, "Deadlock": 0}
    only_fail = SuiteReport(["brake"], 1, [result(0, CENTRALIZED, total=5.0), result(0, "brake", "Deadlock")])
    assert only_fail.aet("brake") is None
    assert "n/a" in report_table(only_fail)


def test_empty_report_is_header_only():
    for rep in (None, SuiteReport(["ipg"], 0)):
        lines = report_table(rep).splitlines()
        assert len(lines) == 2
        assert lines[0].split()[:2] == ["Policy", "Success"]


def test_aet_formatting():
    assert format_aet(-0.9104) == "-0.910"
    assert format_aet(0.0) == "+0.000"
    assert format_aet(None) == "n/a"


def test_policy_label():
    assert policy_label("IPG") == "ipg"
    assert policy_label(["ipg", "ipg"]) == "ipg"
    assert policy_label(["ipg", "vanilla"]) == "ipg/vanilla"


def test_trace_safety_matches_brute_force():
    sc = Scenario("open", np.array([[0, 0, 0, 0], [4, 0, math.pi, 0.0]]),
                  (AgentParams(goal=(4, 0.5), r=1.5), AgentParams(goal=(0, -0.5), r=1.5)), (), (-3, -3, 7, 3))
    tr = run(sc, "ipg", SimConfig(max_steps=30))
    d, c = trace_safety(tr)
    pos = tr.states[:, :, :2]
    assert d == pytest.approx(np.linalg.norm(pos[:, 0] - pos[:, 1], axis=1).min())
    assert c == math.inf


def test_run_suite_small():
    sc = Scenario("solo", np.array([[0, 0, 0, 0.0]]), (AgentParams(goal=(2, 0)),), (), (-3, -3, 3, 3))
    rep = run_suite([sc, sc], ["ipg", "vanilla", "centralized"])
    assert rep.policies == ["ipg", "vanilla"]
    assert rep.counts("ipg")["Success"] == 2
    assert rep.aet(CENTRALIZED) == 0.0
    assert [r["policy"] for r in rep.rows()[:3]] == [CENTRALIZED, "ipg", "vanilla"]
    with pytest.raises(ValueError):
        run_suite([])
