"""Suite evaluation: outcome counts per policy and extra time against the centralized baseline."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .geometry import clearance
from .policies import PolicyKind
from .scenarios import Scenario
from .sim import OutcomeKind, SimConfig, SimTrace, run

log = logging.getLogger(__name__)

CENTRALIZED = "centralized"
DEFAULT_POLICIES = ("ipg", "vanilla", "brake")


@dataclass(frozen=True)
class CaseResult:
    case: int
    scenario: str
    policy: str
    outcome: str
    total_time: float | None
    completion_times: tuple[float | None, ...]
    collision_step: int | None
    steps: int
    min_distance: float    # closest approach between any two agents over the run, m
    min_clearance: float   # smallest centre-to-obstacle distance over the run, m


def policy_label(assignment) -> str:
    """Name of a per-agent assignment: ``"ipg"`` for a uniform one, else ``"ipg/vanilla"``."""
    if isinstance(assignment, (str, PolicyKind)):
        assignment = [assignment]
    names = [PolicyKind.parse(a).value if isinstance(a, str) else PolicyKind(a).value for a in assignment]
    return names[0] if len(set(names)) == 1 else "/".join(names)


def trace_safety(trace: SimTrace) -> tuple[float, float]:
    """Minimum inter-agent distance and minimum obstacle clearance of any agent over a trace."""
    states = trace.states
    n = states.shape[1]
    d_min = math.inf
    for i in range(n):
        for j in range(i + 1, n):
            d = np.hypot(states[:, i, 0] - states[:, j, 0], states[:, i, 1] - states[:, j, 1])
            d_min = min(d_min, float(d.min()))
    c_min = math.inf
    for s in range(states.shape[0]):
        for i in range(n):
            c_min = min(c_min, clearance(trace.scenario.obstacles, states[s, i, 0], states[s, i, 1]))
    return d_min, c_min


def summarize(case: int, label: str, trace: SimTrace) -> CaseResult:
    d_min, c_min = trace_safety(trace)
    o = trace.outcome
    return CaseResult(case, trace.scenario.name, label, o.kind.value, o.total_time,
                      tuple(o.completion_times), o.collision_step, trace.n_steps, d_min, c_min)


def _run_case(args) -> list[CaseResult]:
    case, scenario, assignments, cfg = args
    out = [summarize(case, CENTRALIZED, run(scenario, PolicyKind.CENTRALIZED, cfg))]
    for a in assignments:
        out.append(summarize(case, policy_label(a), run(scenario, a, cfg)))
    return out


@dataclass
class SuiteReport:
    """Per-case results of every policy plus the centralized baseline."""

    policies: list[str]
    n_cases: int
    results: list[CaseResult] = field(default_factory=list)

    def case_results(self, policy: str) -> list[CaseResult]:
        return sorted((r for r in self.results if r.policy == policy), key=lambda r: r.case)

    def counts(self, policy: str) -> dict[str, int]:
        c = {k.value: 0 for k in OutcomeKind}
        for r in self.case_results(policy):
            c[r.outcome] += 1
        return c

    @property
    def excluded_cases(self) -> list[int]:
        """Cases where the centralized baseline failed; they carry no extra time."""
        return [r.case for r in self.case_results(CENTRALIZED) if r.outcome != OutcomeKind.SUCCESS.value]

    def extra_times(self, policy: str) -> dict[int, float]:
        """Extra total time over the centralized baseline, by case, where both succeeded."""
        base = {r.case: r.total_time for r in self.case_results(CENTRALIZED)
                if r.outcome == OutcomeKind.SUCCESS.value}
        return {r.case: r.total_time - base[r.case] for r in self.case_results(policy)
                if r.outcome == OutcomeKind.SUCCESS.value and r.case in base}

    def aet(self, policy: str) -> float | None:
        extra = self.extra_times(policy)
        if not extra:
            return None
        return float(sum(extra[c] for c in sorted(extra)) / len(extra))

    def rows(self) -> list[dict]:
        """Machine-readable per-case rows, ordered by case then policy."""
        order = {p: k for k, p in enumerate([CENTRALIZED, *self.policies])}
        rs = sorted(self.results, key=lambda r: (r.case, order.get(r.policy, len(order))))
        return [asdict(r) for r in rs]


def run_suite(suite: Sequence[Scenario], policies=DEFAULT_POLICIES, cfg: SimConfig = SimConfig(),
              jobs: int = 1) -> SuiteReport:
    """Run the centralized baseline and each assignment in ``policies`` on every case.

    Each entry of ``policies`` is a policy name (used by every agent) or a
    per-agent sequence. ``jobs > 1`` runs cases in worker processes; results
    are assembled by case index, so the report does not depend on ``jobs``.
    """
    suite = list(suite)
    if not suite:
        raise ValueError("suite is empty")
    labels = [policy_label(a) for a in policies]
    if CENTRALIZED in labels:
        labels.remove(CENTRALIZED)
        policies = [a for a in policies if policy_label(a) != CENTRALIZED]
    tasks = [(k, sc, list(policies), cfg) for k, sc in enumerate(suite)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_case = list(pool.map(_run_case, tasks))
    else:
        per_case = [_run_case(t) for t in tasks]
    report = SuiteReport(labels, len(suite), [r for rs in per_case for r in rs])
    for c in report.excluded_cases:
        log.warning("centralized baseline failed on case %d (%s); excluded from extra time",
                    c, suite[c].name)
    return report


def format_aet(value: float | None) -> str:
    return "n/a" if value is None else f"{value:+.3f}"


def report_table(report: SuiteReport | None) -> str:
    """Plain-text table with one row per policy."""
    header = ("Policy", "Success Rate", "Deadlock", "Collision", "Total", "AET (s)")
    rows = []
    if report is not None and report.results:
        for p in [*report.policies, CENTRALIZED]:
            c = report.counts(p)
            total = sum(c.values())
            rows.append((p, f"{c['Success']}/{report.n_cases}", str(c["Deadlock"]),
                         str(c["Collision"]), str(total), format_aet(report.aet(p))))
    widths = [max(len(r[k]) for r in [header, *rows]) for k in range(len(header))]

    def line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    out = [line(header), line(["-" * w for w in widths])]
    out.extend(line(r) for r in rows)
    return "\n".join(out) + "\n"
