"""Compare the compiled and pure-Python integration kernels.

    python3 benchmarks/bench_kernel.py --horizon 20 --dt 1e-3 --repeat 3
"""
import argparse
import time

import numpy as np

from hollingjump import _backend, presets
from hollingjump.integrator import SolverConfig, integrate_path
from hollingjump.jumps import RngSpec


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=float, default=20.0)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--preset", default="baseline", choices=sorted(presets.PRESETS))
    args = ap.parse_args(argv)

    spec = presets.PRESETS[args.preset]()
    cfg = SolverConfig(args.horizon, args.dt, rng=RngSpec(7))
    steps = cfg.n_base
    results = {}
    for name in ("python", "cython"):
        try:
            _backend.implementation(name)
        except ImportError:
            print(f"{name:>7}: not available")
            continue
        t, traj = best_time(lambda: integrate_path(spec, cfg, backend=name), args.repeat)
        results[name] = (t, traj)
        print(f"{name:>7}: {t * 1e3:9.2f} ms  ({steps / t:,.0f} steps/s)")
    if len(results) == 2:
        (tp, a), (tc, b) = results["python"], results["cython"]
        same = np.array_equal(a.log_states, b.log_states)
        print(f"speed-up {tp / tc:.1f}x, outputs bit-identical: {same}")


if __name__ == "__main__":
    main()
