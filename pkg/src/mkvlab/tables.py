"""Table-defined kernels loaded from CSV.

The only way to use a kernel that is not in the builtin registry is a CSV
table with columns ``t,x,y,b_1,sigma_11..sigma_1k`` (scalar state, k noise
columns).  Rows must fill the full Cartesian grid of their distinct t, x and
y values; evaluation is multilinear interpolation with queries clamped to
the grid box.  Regularity metadata (bounds, Lipschitz constants, the drift
modulus in x) is estimated from the grid itself.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import ScenarioError
from .kernels import Bounds, KernelSpec, ModulusFamily

__all__ = ["load_table_kernel"]


def _axis_locate(grid: np.ndarray, q):
    """Clamped bracketing indices and interpolation weight along one axis."""
    q = np.asarray(q, dtype=float)
    if grid.size == 1:
        z = np.zeros(q.shape, dtype=np.intp)
        return z, z, np.zeros(q.shape)
    q = np.clip(q, grid[0], grid[-1])
    hi = np.clip(np.searchsorted(grid, q, side="right"), 1, grid.size - 1)
    lo = hi - 1
    w = (q - grid[lo]) / (grid[hi] - grid[lo])
    return lo, hi, w


class _Table:
    def __init__(self, tg, xg, yg, b, sig):
        self.tg, self.xg, self.yg = tg, xg, yg
        self.b = b        # (nt, nx, ny)
        self.sig = sig    # (nt, nx, ny, d1)

    def _interp(self, values, t, x, y):
        lt, ht, wt = _axis_locate(self.tg, t)
        lx, hx, wx = _axis_locate(self.xg, x)
        ly, hy, wy = _axis_locate(self.yg, y)
        extra = values.ndim - 3
        if extra:
            wx = wx[..., None]
            wy = wy[..., None]
            wt = np.asarray(wt)[..., None]
        out = 0.0
        for it, ct in ((lt, 1.0 - wt), (ht, wt)):
            for ix, cx in ((lx, 1.0 - wx), (hx, wx)):
                for iy, cy in ((ly, 1.0 - wy), (hy, wy)):
                    out = out + ct * cx * cy * values[it, ix, iy]
        return out

    def eval_b(self, t, x, y):
        return self._interp(self.b, t, x, y)

    def eval_sig(self, t, x, y):
        return self._interp(self.sig, t, x, y)


def _broadcast_scalar_pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
    xb = np.broadcast_to(x, shape + (1,))[..., 0]
    yb = np.broadcast_to(y, shape + (1,))[..., 0]
    return shape, xb, yb


def _read_rows(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ScenarioError(f"table {path}: empty file") from None
        header = [h.strip() for h in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ScenarioError(
                    f"table {path}: line {lineno} has {len(row)} fields, "
                    f"expected {len(header)}"
                )
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise ScenarioError(f"table {path}: line {lineno}: {exc}") from None
    if not rows:
        raise ScenarioError(f"table {path}: no data rows")
    return header, np.asarray(rows, dtype=float)


def load_table_kernel(path, name: str | None = None) -> KernelSpec:
    """Build a KernelSpec from a CSV table.

    The header must be ``t,x,y,b_1,sigma_11,...`` and the rows must cover
    every combination of the distinct t, x, y values exactly once.
    """
    path = Path(path)
    header, data = _read_rows(path)

    if header[:4] != ["t", "x", "y", "b_1"]:
        raise ScenarioError(
            f"table {path}: header must start with t,x,y,b_1 (got {header[:4]})"
        )
    sig_cols = header[4:]
    expected = [f"sigma_1{k + 1}" for k in range(len(sig_cols))]
    if not sig_cols or sig_cols != expected:
        raise ScenarioError(
            f"table {path}: diffusion columns must be {expected or ['sigma_11']} "
            f"(got {sig_cols})"
        )
    d1 = len(sig_cols)

    tg = np.unique(data[:, 0])
    xg = np.unique(data[:, 1])
    yg = np.unique(data[:, 2])
    nt, nx, ny = tg.size, xg.size, yg.size
    if data.shape[0] != nt * nx * ny:
        raise ScenarioError(
            f"table {path}: {data.shape[0]} rows but the grid needs "
            f"{nt}*{nx}*{ny} = {nt * nx * ny} (full Cartesian coverage)"
        )

    b = np.full((nt, nx, ny), np.nan)
    sig = np.full((nt, nx, ny, d1), np.nan)
    it = np.searchsorted(tg, data[:, 0])
    ix = np.searchsorted(xg, data[:, 1])
    iy = np.searchsorted(yg, data[:, 2])
    if not np.isnan(b[it, ix, iy]).all():
        raise ScenarioError(f"table {path}: duplicate (t, x, y) rows")
    b[it, ix, iy] = data[:, 3]
    sig[it, ix, iy] = data[:, 4:]
    if np.isnan(b).any():
        raise ScenarioError(f"table {path}: grid has missing (t, x, y) combinations")

    table = _Table(tg, xg, yg, b, sig)

    def drift(t, x, y):
        shape, xb, yb = _broadcast_scalar_pair(x, y)
        return np.asarray(table.eval_b(t, xb, yb)).reshape(shape + (1,))

    def diffusion(t, x, y):
        shape, xb, yb = _broadcast_scalar_pair(x, y)
        return np.asarray(table.eval_sig(t, xb, yb)).reshape(shape + (1, d1))

    sig_row = np.sqrt(np.einsum("txyk,txyk->txy", sig, sig))
    bounds = Bounds(drift=float(np.max(np.abs(b))), diffusion=float(np.max(sig_row)))

    def _max_slope(values, grid, axis):
        if grid.size < 2:
            return 0.0
        diff = np.abs(np.diff(values, axis=axis))
        steps = np.diff(grid).reshape([-1 if a == axis else 1 for a in range(diff.ndim)])
        return float(np.max(diff / steps))

    lip_y = max(
        _max_slope(b, yg, axis=2),
        max((_max_slope(sig[..., k], yg, axis=2) for k in range(d1)), default=0.0),
    )
    lip_x_sigma = max(
        (_max_slope(sig[..., k], xg, axis=1) for k in range(d1)), default=0.0
    )

    return KernelSpec(
        drift_kernel=drift,
        diffusion_kernel=diffusion,
        d=1,
        d1=d1,
        declared_bounds=bounds,
        declared_lipschitz_y=lip_y,
        declared_lipschitz_x_sigma=lip_x_sigma,
        drift_modulus=_grid_modulus(b, xg),
        name=name or f"table:{path.stem}",
        drift_depends_y=bool(np.ptp(b, axis=2).max() > 0.0) if ny > 1 else False,
        diffusion_depends_y=bool(np.ptp(sig, axis=2).max() > 0.0) if ny > 1 else False,
    )


def _grid_modulus(b: np.ndarray, xg: np.ndarray) -> ModulusFamily:
    """Empirical x-modulus of the tabulated drift.

    For every pair of grid abscissae, record (distance, oscillation over all
    t and y); the running maximum in distance order is a valid modulus table
    for the interpolant.
    """
    nx = xg.size
    if nx < 2:
        return ModulusFamily("zero")
    pairs = []
    for i in range(nx - 1):
        for j in range(i + 1, nx):
            osc = float(np.max(np.abs(b[:, j, :] - b[:, i, :])))
            pairs.append((float(xg[j] - xg[i]), osc))
    pairs.sort()
    radii, values = [], []
    running = 0.0
    for r, osc in pairs:
        running = max(running, osc)
        if radii and math.isclose(r, radii[-1], rel_tol=1e-12):
            values[-1] = running
        else:
            radii.append(r)
            values.append(running)
    return ModulusFamily("table", radii=tuple(radii), values=tuple(values))
