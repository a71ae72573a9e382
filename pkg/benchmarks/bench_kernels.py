"""Time the compiled and pure-Python kernels on the same games.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ipgsim.costs import HORIZON
from ipgsim.game import centralized_game
from ipgsim.kernels import BACKENDS
from ipgsim.scenarios import make_open_area, narrow_way_scenario
from ipgsim.solver import SolverConfig, goal_seeking_guess, solve


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_game(label, scenario, repeat):
    spec = centralized_game(scenario, horizon=HORIZON)
    x0 = scenario.x0
    U = goal_seeking_guess(x0, spec)
    T, N = U.shape[0], U.shape[1]
    Uf = U.reshape(T, 2 * N)
    rows = {}
    for name, cls in BACKENDS.items():
        ker = cls(spec.packed)
        xs = ker.rollout(x0.reshape(-1), Uf)
        rows[name] = {
            "rollout": best_of(lambda: ker.rollout(x0.reshape(-1), Uf), repeat),
            "cost": best_of(lambda: ker.cost(xs, Uf), repeat),
            "quadratize": best_of(lambda: ker.quadratize(xs, Uf), repeat),
            "backward": best_of(lambda: ker.backward(xs, Uf, 1e-6), repeat),
        }
    cfg = SolverConfig(max_iterations=30)
    for name in BACKENDS:
        rows[name]["solve"] = best_of(lambda: solve(x0, spec, U, cfg, backend=name), max(1, repeat // 2))
    ops = list(next(iter(rows.values())))
    print(f"\n{label}: {N} agents, horizon {T}")
    print(f"{'op':<12}" + "".join(f"{n:>14}" for n in rows) + ("     speedup" if "cython" in rows else ""))
    for op in ops:
        line = f"{op:<12}" + "".join(f"{rows[n][op] * 1e3:>12.3f}ms" for n in rows)
        if "cython" in rows:
            line += f"{rows['python'][op] / rows['cython'][op]:>11.1f}x"
        print(line)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    np.set_printoptions(precision=3)
    if "cython" not in BACKENDS:
        print("compiled extension not built; timing the Python kernels only")
    bench_game("narrow way", narrow_way_scenario(), args.repeat)
    bench_game("open area", make_open_area(3), args.repeat)


if __name__ == "__main__":
    main()
