"""Time the numba and numpy kernels on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 3] [--paths 5000]

Each case is run once to warm up (numba compiles or loads its cache) and
then timed ``--repeat`` times; the best time is reported together with the
largest difference between the two backends' outputs.
"""

import argparse
import time

import numpy as np

from dynpersuasion import Policy, compute_equilibrium, load_fixture, induced_flow_payoff
from dynpersuasion._accel import HAVE_NUMBA
from dynpersuasion.hjb_fd import solve_fd
from dynpersuasion.simulate import SimConfig, simulate_paths


def best_of(fn, repeat):
    fn()
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_fd(repeat):
    rows = []
    for name, rs in (("two_action", 1 / 16), ("three_action", 4.0), ("quartic", 1.0)):
        u = induced_flow_payoff(load_fixture(name))
        for n in (4001, 16001):
            res = {}
            for be in ("numba", "numpy"):
                res[be] = best_of(lambda: solve_fd(u, rs, n, backend=be), repeat)
            diff = np.abs(res["numba"][1].values - res["numpy"][1].values).max()
            rows.append((f"fd {name} rs={rs:g} N={n}", res["numba"][0], res["numpy"][0], diff))
    return rows


def bench_sim(repeat, paths):
    m = load_fixture("three_action")
    rep = compute_equilibrium(m, 4.0)
    pol = Policy(rep.funding_region)
    cfg = SimConfig(n_paths=paths, seed=11)
    res = {}
    for be in ("numba", "numpy"):
        res[be] = best_of(lambda: simulate_paths(m, pol, 5 / 8, cfg, backend=be), repeat)
    a, b = res["numba"][1], res["numpy"][1]
    diff = np.abs(a.terminal - b.terminal).max()
    return [(f"sim three_action paths={paths}", res["numba"][0], res["numpy"][0], diff)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--paths", type=int, default=5000)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rows = bench_fd(args.repeat) + bench_sim(args.repeat, args.paths)
    print(f"{'case':40s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, tn, tp, d in rows:
        print(f"{name:40s} {tn:10.4f} {tp:10.4f} {tp / tn:8.1f} {d:10.2e}")


if __name__ == "__main__":
    main()
