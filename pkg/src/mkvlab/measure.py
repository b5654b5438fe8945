"""Weighted empirical measures and distances between them.

An :class:`EmpiricalMeasure` is a finite atom cloud ``sum_j w_j delta_{y_j}``
with strictly positive weights summing to one. Moments are accumulated with
exactly rounded summation (:func:`math.fsum`) so summaries do not depend on
evaluation order or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._summation import ensemble_cov, ensemble_mean, ordered_sum
from .errors import EmptyMeasureError

__all__ = [
    "EmpiricalMeasure",
    "second_moment",
    "mean_coupling_distance",
    "wasserstein1_1d",
]

_WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Atoms ``points`` of shape (n, d) with weights of shape (n,)."""

    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise EmptyMeasureError("an empirical measure needs at least one atom")
        n = pts.shape[0]
        if self.weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (n,):
                raise ValueError(f"weights shape {w.shape} does not match {n} atoms")
            if np.any(w <= 0):
                raise ValueError("weights must be strictly positive")
            total = ordered_sum(w)
            if abs(total - 1.0) > _WEIGHT_TOL:
                raise ValueError(f"weights sum to {total!r}, expected 1 within {_WEIGHT_TOL}")
        # Copy before freezing so the caller's arrays keep their flags.
        pts = np.array(pts, dtype=np.float64, order="C")
        w = np.array(w, dtype=np.float64, order="C")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def mean(self) -> np.ndarray:
        if np.allclose(self.weights, self.weights[0]):
            return ensemble_mean(self.points)
        return np.array(
            [ordered_sum(self.weights * self.points[:, k]) for k in range(self.dim)]
        )

    def covariance(self) -> np.ndarray:
        if np.allclose(self.weights, self.weights[0]):
            return ensemble_cov(self.points)
        m = self.mean()
        c = self.points - m
        return np.array(
            [
                [ordered_sum(self.weights * c[:, i] * c[:, j]) for j in range(self.dim)]
                for i in range(self.dim)
            ]
        )


def second_moment(mu: EmpiricalMeasure) -> float:
    """integral of |y|^2 against mu, the P_2 integrability statistic."""
    sq = np.einsum("jk,jk->j", mu.points, mu.points)
    return ordered_sum(mu.weights * sq)


def mean_coupling_distance(mu: EmpiricalMeasure, nu: EmpiricalMeasure, power: int = 2) -> float:
    """E|Y - Z|^power under the index coupling of two aligned atom clouds.

    Requires the two measures to have identical atom counts and weights; the
    coupling pairs atom j with atom j.
    """
    if mu.n_atoms != nu.n_atoms:
        raise ValueError("index coupling needs equal atom counts")
    if not np.array_equal(mu.weights, nu.weights):
        raise ValueError("index coupling needs identical weights")
    diff = mu.points - nu.points
    dist = np.sqrt(np.einsum("jk,jk->j", diff, diff))
    return ordered_sum(mu.weights * dist**power)


def wasserstein1_1d(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """W_1 between one-dimensional empirical measures.

    With equal atom counts and uniform weights this is the mean absolute
    difference of sorted samples; in general it integrates the gap between
    the two quantile functions over (0, 1).
    """
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("wasserstein1_1d is defined for d = 1 only")
    a, wa = mu.points[:, 0], mu.weights
    b, wb = nu.points[:, 0], nu.weights
    uniform = (
        mu.n_atoms == nu.n_atoms
        and np.allclose(wa, 1.0 / mu.n_atoms)
        and np.allclose(wb, 1.0 / nu.n_atoms)
    )
    if uniform:
        gaps = np.abs(np.sort(a, kind="stable") - np.sort(b, kind="stable"))
        return ordered_sum(gaps) / mu.n_atoms

    ia = np.argsort(a, kind="stable")
    ib = np.argsort(b, kind="stable")
    a, wa = a[ia], wa[ia]
    b, wb = b[ib], wb[ib]
    ca = np.cumsum(wa)
    cb = np.cumsum(wb)
    # Merge the two sets of cumulative-probability breakpoints; on each
    # resulting slab both quantile functions are constant.
    levels = np.union1d(ca, cb)
    levels = levels[levels < 1.0 - 1e-15]
    edges = np.concatenate(([0.0], levels, [1.0]))
    mids = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    qa = a[np.searchsorted(ca, mids, side="right").clip(max=len(a) - 1)]
    qb = b[np.searchsorted(cb, mids, side="right").clip(max=len(b) - 1)]
    return ordered_sum(widths * np.abs(qa - qb))
