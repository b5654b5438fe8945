"""Pure-numpy pairwise interaction engines.

Fallback for the compiled core and the only path for custom or table
kernels.  The accumulation contract matches :mod:`mkvlab._core` exactly:
each target keeps its own Kahan compensation and consumes source atoms in
ascending index order, so per-target results are independent of how work is
distributed.

Kernel evaluation is vectorised over (targets x source-block) tiles to keep
the Python-level loop count at m / block instead of m.
"""

from __future__ import annotations

import numpy as np

SOURCE_BLOCK = 256


def pair_drift_sum(spec, t, xs, ys, ws) -> np.ndarray:
    """sum_j ws[j] * b(t, xs[i], ys[j]) for every target i; returns (n, d)."""
    n, d = xs.shape
    m = ys.shape[0]
    acc = np.zeros((n, d))
    comp = np.zeros((n, d))
    for j0 in range(0, m, SOURCE_BLOCK):
        j1 = min(j0 + SOURCE_BLOCK, m)
        vals = np.asarray(
            spec.drift_kernel(t, xs[:, None, :], ys[None, j0:j1, :]), dtype=np.float64
        )
        vals = np.broadcast_to(vals, (n, j1 - j0, d))
        terms = ws[j0:j1, None] * vals
        # Non-finite kernel values make the compensation ill-defined (inf-inf);
        # callers check the result and report the offending triple, so silence
        # the intermediate warning.
        with np.errstate(invalid="ignore"):
            for jj in range(j1 - j0):
                y = terms[:, jj, :] - comp
                s = acc + y
                comp = (s - acc) - y
                acc = s
    return acc


def pair_diffusion_sum(spec, t, xs, ys, ws, d1: int) -> np.ndarray:
    """sum_j ws[j] * sigma(t, xs[i], ys[j]); returns (n, d, d1)."""
    n, d = xs.shape
    m = ys.shape[0]
    acc = np.zeros((n, d, d1))
    comp = np.zeros((n, d, d1))
    for j0 in range(0, m, SOURCE_BLOCK):
        j1 = min(j0 + SOURCE_BLOCK, m)
        vals = np.asarray(
            spec.diffusion_kernel(t, xs[:, None, :], ys[None, j0:j1, :]), dtype=np.float64
        )
        vals = np.broadcast_to(vals, (n, j1 - j0, d, d1))
        terms = ws[j0:j1, None, None] * vals
        with np.errstate(invalid="ignore"):
            for jj in range(j1 - j0):
                y = terms[:, jj, :, :] - comp
                s = acc + y
                comp = (s - acc) - y
                acc = s
    return acc
