"""Time the hot kernels under the numba and numpy backends.

    python3 benchmarks/bench_kernels.py [--repeat N] [--quick]

Prints one row per kernel with the best-of-N wall time for each backend and
the speed-up. Numba compilation happens in a warm-up call that is not timed.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from semimvs import _accel, kernels, synth, using_backend
from semimvs.evaluation import SpatialIndex
from semimvs.gpm import gpm_filter
from semimvs.sweep import DepthHypotheses, plane_sweep_depth


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(quick: bool):
    rng = np.random.default_rng(0)
    n = 256 if quick else 512
    img = rng.random((n, n, 3))
    u = rng.uniform(-1, n, n * n)
    v = rng.uniform(-1, n, n * n)
    plane = rng.random((n, n))
    x = rng.random((n, n, 3))
    w = rng.random((n, n, 3)) * 0.3
    pts = rng.normal(size=(50_000 if quick else 200_000, 3))
    q = rng.normal(size=(50_000 if quick else 200_000, 3))
    index = SpatialIndex(pts)
    res = 64 if quick else 128
    sc = synth.generate("plane", n_views=3, resolution=(res, res), seed=0)
    lo, hi = sc.depth_range
    hyps = DepthHypotheses.linspace(0.9 * lo, 1.1 * hi, 32)
    return [
        ("bilinear_sample", lambda: kernels.bilinear_sample(img, u, v)),
        ("box_sum r=2", lambda: kernels.box_sum(plane, 2)),
        ("propagate_lr", lambda: kernels.propagate_lr(x, w)),
        ("grid nn query", lambda: index.query(q)),
        ("plane sweep (32 depths)", lambda: plane_sweep_depth(sc.views[0], sc.views[1:], hyps, temperature=0.01)),
        ("gpm_filter", lambda: gpm_filter(sc.views[0].image, sc.views[0])),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    print(f"{'kernel':<26}{'numba s':>12}{'numpy s':>12}{'speed-up':>10}")
    for name, fn in cases(args.quick):
        with using_backend("numba"):
            tn = best_of(fn, args.repeat)
        with using_backend("numpy"):
            tp = best_of(fn, args.repeat)
        print(f"{name:<26}{tn:>12.4f}{tp:>12.4f}{tp / tn:>9.1f}x")


if __name__ == "__main__":
    main()
