"""Time the compiled path kernel against the numpy fallback.

    python benchmarks/bench_simulate.py [--paths N] [--repeat R]

Both backends run the same paths (same seed), so the script also reports the
largest per-path disagreement.
"""
import argparse
import time

import numpy as np

from creepdiv import LevyModel, SimConfig, build_scale_pair, solve_threshold
from creepdiv import simulate as sim


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--x0", type=float, default=1.0)
    args = ap.parse_args(argv)

    m = LevyModel(c=2.0, sigma=1.0, jumps=((1.0, 0.5),), q=4.0, delta=1.8, S=0.05)
    b = solve_threshold(build_scale_pair(m), m, diagnostics=False).b_star
    cfg = SimConfig(x0=args.x0, b=b, n_paths=args.paths)

    rows = {}
    backends = ["python"] + (["compiled"] if sim.BACKEND == "compiled" else [])
    for name in backends:
        rows[name] = best_of(lambda: sim.simulate_paths(m, cfg, name), args.repeat)
    print(f"{'backend':<10}{'seconds':>10}{'paths/s':>14}")
    for name, (secs, _) in rows.items():
        print(f"{name:<10}{secs:>10.3f}{args.paths / secs:>14.0f}")
    if "compiled" in rows:
        a, p = rows["compiled"][1], rows["python"][1]
        print(f"speedup   {rows['python'][0] / rows['compiled'][0]:.1f}x")
        print(f"max |dividend diff| {np.max(np.abs(a.dividends - p.dividends)):.2e}, "
              f"class mismatches {int(np.count_nonzero(a.klass != p.klass))}")
    else:
        print("compiled kernel not built; only the fallback was timed")


if __name__ == "__main__":
    main()
