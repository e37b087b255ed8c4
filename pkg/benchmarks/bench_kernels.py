"""Compiled affine-field loop vs the numpy step loop.

Both paths run the same recurrence; the script checks they agree and times
them.  Set DALGAME_DISABLE_NUMBA=1 to see that the run falls back to numpy.

    python3 benchmarks/bench_kernels.py [--iters N] [--repeat R]
"""

import argparse
import time

import numpy as np

from dalgame import _accel
from dalgame.integrators import IntegratorConfig, run_trajectory
from dalgame.quadratic import make_example2, make_random_quadratic


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iters", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    print(f"backend: {_accel.backend_name()}")
    cases = [
        ("example2", make_example2()),
        ("random d=30", make_random_quadratic(0, d_per_player=10)),
    ]
    print(f"{'game':<14}{'method':<8}{'numpy s':>10}{'kernel s':>10}{'speedup':>9}{'max diff':>11}")
    for name, game in cases:
        w0 = np.random.default_rng(1).standard_normal(game.d)
        for method, eta in (("euler", 1e-4), ("rk2", 1e-4), ("rk4", 1e-4)):
            cfg = IntegratorConfig(method=method, eta=eta, max_iters=args.iters,
                                   record_every=args.iters // 10, keep_params=True)
            t_np, tr_np = best_time(lambda: run_trajectory(game, w0, cfg, use_kernel=False), 1)
            if not _accel.NUMBA_ENABLED:
                print(f"{name:<14}{method:<8}{t_np:>10.3f}{'-':>10}{'-':>9}{'-':>11}")
                continue
            run_trajectory(game, w0, cfg, use_kernel=True)  # compile / load cache
            t_k, tr_k = best_time(lambda: run_trajectory(game, w0, cfg, use_kernel=True), args.repeat)
            diff = max(float(np.max(np.abs(a.params - b.params)))
                       for a, b in zip(tr_np.records, tr_k.records))
            print(f"{name:<14}{method:<8}{t_np:>10.3f}{t_k:>10.4f}{t_np / t_k:>9.0f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
