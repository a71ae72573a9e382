"""Command-line entry point: ``ipgsim run | bench | render | scenario``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import bench as bench_mod
from .policies import PolicyKind
from .records import (config_from_dict, config_to_dict, dump_json, load_run, load_scenario,
                      save_scenario, write_run)
from .render import render_frames
from .scenarios import (make_open_area, narrow_way_scenario, random_narrow_way_suite,
                        t_intersection_scenario)
from .sim import SimConfig, run

log = logging.getLogger("ipgsim")

BUILTIN_SCENARIOS = {
    "narrow_way": narrow_way_scenario,
    "t_intersection": t_intersection_scenario,
    "open_area": make_open_area,
}


def policy_list(text: str) -> list[PolicyKind]:
    try:
        return [PolicyKind.parse(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _scenario_arg(name: str):
    if name in BUILTIN_SCENARIOS and not Path(name).exists():
        return BUILTIN_SCENARIOS[name]()
    return load_scenario(name)


def effective_config(args, file_config: dict | None = None) -> SimConfig:
    """Defaults, overlaid by the scenario file's ``config``, overlaid by flags."""
    cfg = config_from_dict(file_config or {})
    flags = {}
    for key in ("seed", "max_steps"):
        if getattr(args, key, None) is not None:
            flags[key] = getattr(args, key)
    if getattr(args, "horizon", None) is not None:
        flags["solver"] = {"horizon": args.horizon}
    return config_from_dict(flags, cfg)


def cmd_run(args) -> int:
    scenario = _scenario_arg(args.scenario)
    policies = args.policy
    if len(policies) not in (1, scenario.n_agents):
        raise SystemExit(f"error: {len(policies)} policies given for {scenario.n_agents} agents")
    cfg = effective_config(args, scenario.config)
    trace = run(scenario, policies, cfg, threads=args.threads)
    out = write_run(trace, args.out)
    if args.render_every:
        render_frames(trace, out / "frames", args.render_every)
    o = trace.outcome
    total = "-" if o.total_time is None else f"{o.total_time:.1f} s"
    print(f"{scenario.name}: {o.kind.value} after {trace.n_steps} steps (total {total}) -> {out}")
    return 0


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def cmd_bench(args) -> int:
    if args.suite != "narrow_way":
        raise SystemExit(f"error: unknown suite {args.suite!r}")
    suite = random_narrow_way_suite(args.cases, seed=args.seed)
    cfg = effective_config(args)
    policies = [p.value for p in args.policies]
    report = bench_mod.run_suite(suite, policies, cfg, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = bench_mod.report_table(report)
    (out / "report.txt").write_text(table)
    rows = report.rows()
    with open(out / "cases.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(rows[0]))
        for r in rows:
            w.writerow([_cell(v) for v in r.values()])
    summary = {
        "suite": args.suite, "cases": args.cases, "seed": args.seed,
        "policies": {p: {**report.counts(p), "aet_s": report.aet(p)}
                     for p in [*report.policies, bench_mod.CENTRALIZED]},
        "excluded_cases": report.excluded_cases,
        "config": config_to_dict(cfg),
    }
    dump_json(summary, out / "report.json")
    sys.stdout.write(table)
    return 0


def cmd_render(args) -> int:
    try:
        trace = load_run(args.trace_dir)
    except (FileNotFoundError, ValueError) as exc:
        raise SystemExit(f"error: cannot render {args.trace_dir}: {exc}")
    paths = render_frames(trace, args.out, args.every)
    print(f"wrote {len(paths)} frames to {args.out}")
    return 0


def cmd_scenario(args) -> int:
    save_scenario(BUILTIN_SCENARIOS[args.name](), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ipgsim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="one closed-loop run")
    r.add_argument("scenario", help="scenario JSON file or built-in name "
                                    f"({', '.join(BUILTIN_SCENARIOS)})")
    r.add_argument("--policy", type=policy_list, default=[PolicyKind.IPG],
                   help="comma-separated policy per agent, or one for all (default: ipg)")
    r.add_argument("--seed", type=int)
    r.add_argument("--max-steps", type=int)
    r.add_argument("--horizon", type=int)
    r.add_argument("--threads", type=int, help="concurrent per-agent solves (default: IPG_THREADS)")
    r.add_argument("--render-every", type=int, default=0, metavar="K",
                   help="also write an SVG every K steps")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="randomized suite against the centralized baseline")
    b.add_argument("--suite", default="narrow_way")
    b.add_argument("--cases", type=int, default=20)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--policies", type=policy_list,
                   default=[PolicyKind(p) for p in bench_mod.DEFAULT_POLICIES])
    b.add_argument("--max-steps", type=int)
    b.add_argument("--horizon", type=int)
    b.add_argument("--jobs", type=int, default=1, help="cases run in parallel processes")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("render", help="SVG frames of a saved run")
    v.add_argument("trace_dir")
    v.add_argument("--every", type=int, default=10)
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_render)

    s = sub.add_parser("scenario", help="write a built-in scenario as JSON")
    s.add_argument("name", choices=sorted(BUILTIN_SCENARIOS))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scenario)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
