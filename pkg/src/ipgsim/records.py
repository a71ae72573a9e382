"""Run artifacts on disk: scenario and config JSON, trace CSV, plans JSON lines, summary JSON.

Floats are written with Python's shortest round-trip ``repr``, so a saved run
reloads into an identical :class:`SimTrace`.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, fields, replace
from pathlib import Path

import numpy as np

from .policies import AgentDecision, PolicyKind
from .scenarios import Scenario
from .sim import Outcome, OutcomeKind, SimConfig, SimTrace
from .solver import JointPlan, SolverConfig

TRACE_FILE = "trace.csv"
PLANS_FILE = "plans.jsonl"
SUMMARY_FILE = "summary.json"
SCENARIO_FILE = "scenario.json"

_AGENT_COLS = ("px", "py", "theta", "v", "a", "w")


def _num(x) -> str:
    return repr(float(x))


def dump_json(obj, path: Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _plain(obj):
    """numpy arrays and scalars to lists and Python floats, recursively."""
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


# -- config and scenario ---------------------------------------------------------

def config_to_dict(cfg: SimConfig) -> dict:
    return _plain(asdict(cfg))


def config_from_dict(d: dict | None, base: SimConfig = SimConfig()) -> SimConfig:
    """Overlay the keys of ``d`` on ``base``; unknown keys are rejected."""
    d = dict(d or {})
    solver = base.solver
    if "solver" in d:
        s = dict(d.pop("solver"))
        known = {f.name for f in fields(SolverConfig)}
        bad = set(s) - known
        if bad:
            raise ValueError(f"unknown solver settings {sorted(bad)}")
        if "line_search" in s:
            s["line_search"] = tuple(float(a) for a in s["line_search"])
        solver = replace(solver, **s)
    known = {f.name for f in fields(SimConfig)} - {"solver"}
    bad = set(d) - known
    if bad:
        raise ValueError(f"unknown simulation settings {sorted(bad)}")
    return replace(base, solver=solver, **d)


def save_scenario(scenario: Scenario, path) -> None:
    dump_json(_plain(scenario.to_dict()), Path(path))


def load_scenario(path) -> Scenario:
    return Scenario.from_dict(json.loads(Path(path).read_text())).validate()


# -- writing a run ----------------------------------------------------------------

def _plan_dict(plan: JointPlan) -> dict:
    return {"U": _plain(plan.U), "xs": _plain(plan.xs), "cost": float(plan.cost),
            "converged": plan.converged, "iterations": plan.iterations,
            "cost_history": _plain(plan.cost_history)}


def decision_record(step: int, ego: int, d: AgentDecision) -> dict:
    return {
        "step": step, "ego": ego, "control": _plain(d.control), "feasible": d.feasible,
        "agents": list(d.agents), "plan": None if d.plan is None else _plan_dict(d.plan),
        "predicted_agents": list(d.predicted_agents),
        "predictions": None if d.predictions is None else _plain(d.predictions),
    }


def outcome_so_far(trace: SimTrace, step: int) -> str:
    if step == trace.n_steps:
        return trace.outcome.kind.value
    return "running"


def summary_dict(trace: SimTrace) -> dict:
    o = trace.outcome
    return {
        "scenario": trace.scenario.name,
        "policies": [k.value for k in trace.assignment],
        "outcome": o.kind.value,
        "completion_times_s": list(o.completion_times),
        "total_time_s": o.total_time,
        "collision_step": o.collision_step,
        "arrival_steps": list(trace.arrival_steps),
        "steps": trace.n_steps,
        "config": config_to_dict(trace.cfg),
    }


def write_run(trace: SimTrace, out_dir) -> Path:
    """Write ``scenario.json``, ``trace.csv``, ``plans.jsonl`` and ``summary.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_scenario(trace.scenario, out / SCENARIO_FILE)
    n = trace.scenario.n_agents
    with open(out / TRACE_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "t", *[f"{c}{i}" for i in range(n) for c in _AGENT_COLS], "outcome"])
        for s in range(trace.states.shape[0]):
            row = [str(s), _num(s * trace.cfg.Ts)]
            for i in range(n):
                row += [_num(x) for x in trace.states[s, i]]
                row += [_num(u) for u in trace.controls[s, i]] if s < trace.n_steps else ["", ""]
            row.append(outcome_so_far(trace, s))
            w.writerow(row)
    with open(out / PLANS_FILE, "w") as fh:
        for s, step_decisions in enumerate(trace.decisions):
            for i, d in enumerate(step_decisions):
                fh.write(json.dumps(decision_record(s, i, d), sort_keys=True) + "\n")
    dump_json(summary_dict(trace), out / SUMMARY_FILE)
    return out


# -- reading a run ------------------------------------------------------------------

def _decision_from_record(r: dict) -> AgentDecision:
    plan = None
    if r["plan"] is not None:
        p = r["plan"]
        plan = JointPlan(np.array(p["U"], dtype=float).reshape(-1, len(r["agents"]), 2),
                         np.array(p["xs"], dtype=float).reshape(-1, len(r["agents"]), 4),
                         p["cost"], p["converged"], p["iterations"], list(p["cost_history"]))
    preds = None
    if r["predictions"] is not None:
        preds = np.array(r["predictions"], dtype=float).reshape(-1, len(r["predicted_agents"]), 2)
    return AgentDecision(np.array(r["control"], dtype=float), plan, tuple(r["agents"]),
                         r["feasible"], preds, tuple(r["predicted_agents"]))


def load_run(run_dir) -> SimTrace:
    """Rebuild the :class:`SimTrace` saved by :func:`write_run`."""
    d = Path(run_dir)
    scenario = load_scenario(d / SCENARIO_FILE)
    summary = json.loads((d / SUMMARY_FILE).read_text())
    n = scenario.n_agents
    with open(d / TRACE_FILE, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{d / TRACE_FILE} holds no records")
    states = np.array([[[float(r[f"{c}{i}"]) for c in _AGENT_COLS[:4]] for i in range(n)] for r in rows])
    controls = np.array([[[float(r[f"{c}{i}"]) for c in _AGENT_COLS[4:]] for i in range(n)]
                         for r in rows[:-1]]).reshape(-1, n, 2)
    decisions = [[None] * n for _ in range(len(rows) - 1)]
    with open(d / PLANS_FILE) as fh:
        for line in fh:
            if line.strip():
                r = json.loads(line)
                decisions[r["step"]][r["ego"]] = _decision_from_record(r)
    outcome = Outcome(OutcomeKind(summary["outcome"]), tuple(summary["completion_times_s"]),
                      summary["total_time_s"], summary["collision_step"])
    return SimTrace(scenario, tuple(PolicyKind(p) for p in summary["policies"]),
                    config_from_dict(summary["config"]), states, controls, decisions,
                    list(summary["arrival_steps"]), outcome)
