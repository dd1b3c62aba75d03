"""Time the numba and numpy walk kernels on the same batch.

    python benchmarks/bench_walk.py --trajectories 20000 --dim 3

The first numba call includes compilation (or loading from the cache); it
is timed separately and excluded from the steady-state figures.
"""

import argparse
import time

import numpy as np

from weakpovm import _kernels as kn
from weakpovm import curves as cv
from weakpovm import sampling
from weakpovm.walk import WalkConfig, simulate_batch


def timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trajectories", type=int, default=20000)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--threshold", type=float, default=8.0)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    curve = cv.OperatorCurve(sampling.random_positive_instrument(args.dim, rng))
    rho = sampling.random_density(args.dim, rng)
    cfg = WalkConfig(args.epsilon, args.threshold, seed=args.seed)

    def run(backend):
        return lambda: simulate_batch(curve, rho, cfg, n=args.trajectories, backend=backend)

    rows = []
    if kn.HAVE_NUMBA:
        t0 = time.perf_counter()
        run("numba")()
        rows.append(("numba first call", time.perf_counter() - t0, None))
        t_nb, b_nb = timed(run("numba"), args.repeat)
        rows.append(("numba", t_nb, b_nb))
    t_np, b_np = timed(run("numpy"), args.repeat)
    rows.append(("numpy", t_np, b_np))

    total_steps = int(b_np.steps.sum())
    print(f"trajectories={args.trajectories} dim={args.dim} eps={args.epsilon} X={args.threshold} "
          f"total steps={total_steps}")
    print(f"{'backend':<18} {'seconds':>10} {'Msteps/s':>10}")
    for name, t, _ in rows:
        print(f"{name:<18} {t:>10.3f} {total_steps / t / 1e6:>10.2f}")
    if kn.HAVE_NUMBA:
        same = (np.array_equal(b_nb.steps, b_np.steps) and np.array_equal(b_nb.final_k, b_np.final_k)
                and b_nb.g.tobytes() == b_np.g.tobytes())
        print(f"speedup numba/numpy: {t_np / t_nb:.1f}x  bit-identical: {same}")


if __name__ == "__main__":
    main()
