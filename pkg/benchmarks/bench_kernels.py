"""Compare the numba kernel with the numpy fallback on tiny gallery problems.

    python3 benchmarks/bench_kernels.py --iters 100000 1000000 --repeat 3

Timings are best-of-``repeat`` wall clock for a full ``solve`` call with one
trace row; the numba kernel is compiled (and cached) before timing.
"""

import argparse
import time

import numpy as np

from hierprox import _kernels
from hierprox.problems import gallery
from hierprox.solver import SolverConfig, solve


def timed(problem, cfg, repeat):
    best, trace = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        trace = solve(problem, cfg)
        best = min(best, time.perf_counter() - t0)
    return best, trace


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iters", type=int, nargs="+", default=[100_000, 1_000_000])
    ap.add_argument("--repeat", type=int, default=1)
    ap.add_argument("--problems", nargs="+", default=["nested3", "nested4", "clamp"])
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'problem':<10} {'dim':>3} {'iters':>9} {'numba s':>9} {'numpy s':>9} {'speedup':>8} {'max |dx|':>9}")
    for name in args.problems:
        e = gallery(name)
        d = e.run_defaults
        kw = {"weight_family": d.get("weight_family", "uniform")}
        # warm-up compiles the kernel outside the timed region
        solve(e.problem, SolverConfig(d["schedule"], 10, d["x0"], backend="numba", **kw))
        for iters in args.iters:
            cfgs = {b: SolverConfig(d["schedule"], iters, d["x0"], trace_every=iters, backend=b, **kw)
                    for b in ("numba", "numpy")}
            t_nb, tr_nb = timed(e.problem, cfgs["numba"], args.repeat)
            t_np, tr_np = timed(e.problem, cfgs["numpy"], args.repeat)
            diff = float(np.max(np.abs(tr_nb.x_final - tr_np.x_final)))
            print(f"{name:<10} {e.problem.dim:>3} {iters:>9} {t_nb:>9.4f} {t_np:>9.3f} "
                  f"{t_np / t_nb:>7.0f}x {diff:>9.1e}")


if __name__ == "__main__":
    main()
