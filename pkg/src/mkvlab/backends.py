"""Backend selection for the O(N^2) pairwise interaction sums.

The compiled extension handles the builtin y-dependent drift kernels it
knows by id; everything else (custom callables, table kernels, a missing
extension, or the MKVLAB_FORCE_FALLBACK=1 override) runs through the numpy
engine in :mod:`mkvlab._purecore`.  Both engines follow the same
accumulation contract, so per-target outputs agree to rounding of the
kernel evaluation itself and are independent of the thread count.

Threads only affect the compiled path: targets are split into contiguous
chunks and each chunk runs with the GIL released.  Each target's sum is a
self-contained ascending loop over sources, so the split cannot change any
result bit.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _purecore
from ._config import get_num_threads


def _fallback_forced() -> bool:
    flag = os.environ.get("MKVLAB_FORCE_FALLBACK", "")
    return flag.strip().lower() not in ("", "0", "false", "no")


_core = None
if not _fallback_forced():
    try:
        from . import _core as _core_ext

        _core = _core_ext
    except ImportError:
        _core = None

BACKEND_NAME = "compiled" if _core is not None else "python"

# Below this many targets the thread fan-out costs more than it saves.
_MIN_ROWS_PER_CHUNK = 256

_pool: ThreadPoolExecutor | None = None
_pool_size = 0


def backend_name() -> str:
    return BACKEND_NAME


def compiled_available() -> bool:
    return _core is not None


def _chunks(n: int, workers: int):
    base, extra = divmod(n, workers)
    bounds = []
    lo = 0
    for w in range(workers):
        hi = lo + base + (1 if w < extra else 0)
        if hi > lo:
            bounds.append((lo, hi))
        lo = hi
    return bounds


def _get_pool(workers: int) -> ThreadPoolExecutor:
    global _pool, _pool_size
    if _pool is None or _pool_size != workers:
        if _pool is not None:
            _pool.shutdown(wait=True)
        _pool = ThreadPoolExecutor(max_workers=workers)
        _pool_size = workers
    return _pool


def pair_drift_sum(spec, t, xs, ys, ws) -> np.ndarray:
    """Dispatch the drift pair sum to the best available engine."""
    if _core is not None and spec.native_id is not None:
        xs = np.ascontiguousarray(xs, dtype=np.float64)
        ys = np.ascontiguousarray(ys, dtype=np.float64)
        ws = np.ascontiguousarray(ws, dtype=np.float64)
        params = np.asarray(spec.native_params, dtype=np.float64)
        n = xs.shape[0]
        out = np.empty((n, xs.shape[1]))
        workers = min(get_num_threads(), max(1, n // _MIN_ROWS_PER_CHUNK))
        if workers <= 1:
            _core.drift_pair_sum(spec.native_id, params, float(t), xs, ys, ws, out, 0, n)
        else:
            pool = _get_pool(workers)
            jobs = [
                pool.submit(
                    _core.drift_pair_sum,
                    spec.native_id, params, float(t), xs, ys, ws, out, lo, hi,
                )
                for lo, hi in _chunks(n, workers)
            ]
            for job in jobs:
                job.result()
        return out
    return _purecore.pair_drift_sum(spec, t, xs, ys, ws)


def pair_diffusion_sum(spec, t, xs, ys, ws) -> np.ndarray:
    """Diffusion pair sum; no builtin kernel needs a compiled path here."""
    return _purecore.pair_diffusion_sum(spec, t, xs, ys, ws, spec.d1)
