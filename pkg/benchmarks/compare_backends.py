"""Time the pairwise drift accumulation: compiled core vs pure numpy.

Usage: python3 benchmarks/compare_backends.py [--sizes 500,1000,2000]
       [--repeat 5] [--threads 1]

Both paths produce identical bits for the mean-field OU kernel; the point
of the compiled core is the O(N^2) inner loop, so that is all this times.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from mkvlab import _config, _purecore, backends
from mkvlab.kernels import builtin_kernel
from mkvlab.rng import STREAM_SYNTH, step_normals


def _bench(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="500,1000,2000,4000")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    _config.set_num_threads(args.threads)

    spec = builtin_kernel("mean_field_ou")
    print(f"backend: {backends.backend_name()}, threads: {args.threads}")
    print(f"{'N':>6} {'compiled ms':>12} {'python ms':>12} {'speedup':>8}")
    for n in sizes:
        xs = step_normals(1, STREAM_SYNTH, 0, n, 1)
        ys = step_normals(1, STREAM_SYNTH, 1, n, 1)
        ws = np.full(n, 1.0 / n)

        t_py = _bench(lambda: _purecore.pair_drift_sum(spec, 0.0, xs, ys, ws), args.repeat)
        if backends.compiled_available():
            t_c = _bench(lambda: backends.pair_drift_sum(spec, 0.0, xs, ys, ws), args.repeat)
            a = backends.pair_drift_sum(spec, 0.0, xs, ys, ws)
            b = _purecore.pair_drift_sum(spec, 0.0, xs, ys, ws)
            assert np.array_equal(a, b), "backends disagree"
            print(f"{n:>6} {t_c * 1e3:>12.3f} {t_py * 1e3:>12.3f} {t_py / t_c:>8.1f}")
        else:
            print(f"{n:>6} {'n/a':>12} {t_py * 1e3:>12.3f} {'':>8}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
