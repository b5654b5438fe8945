"""Interaction kernels and their measure functionals.

A kernel pair ``(b, sigma)`` maps ``(t, x, y)`` to a drift vector and a
diffusion matrix.  Against an empirical measure ``mu = sum_j w_j delta_{y_j}``
the coefficients of the McKean-Vlasov dynamics are the exact finite sums

    B[t, x, mu]     = sum_j w_j b(t, x, y_j)
    Sigma[t, x, mu] = sum_j w_j sigma(t, x, y_j)
    A[t, x, mu]     = Sigma Sigma^T

Sums accumulate in ascending particle-index order with compensated (Kahan)
summation, so results are bit-reproducible for any parallel schedule.

Kernel callables are vectorised: ``x`` and ``y`` are arrays with trailing
dimension ``d`` whose leading shapes broadcast; drift returns ``(..., d)``
and diffusion ``(..., d, d1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import backends
from ._summation import ordered_sum
from .errors import EmptyMeasureError, KernelOverflowError, UnknownKernelError
from .measure import EmpiricalMeasure

__all__ = [
    "Bounds",
    "ModulusFamily",
    "KernelSpec",
    "CoefficientValue",
    "builtin_kernel",
    "BUILTIN_KERNELS",
    "drift_functional",
    "diffusion_functional",
    "diffusion_square",
    "coefficient_value",
    "drift_functional_batch",
    "diffusion_functional_batch",
    "NATIVE_MEAN_FIELD_OU",
    "NATIVE_TANH_ATTRACTION",
]

# Native-kernel ids understood by the compiled core (mirrored in _core.pyx).
NATIVE_MEAN_FIELD_OU = 1
NATIVE_TANH_ATTRACTION = 2

DriftKernel = Callable[[float, np.ndarray, np.ndarray], np.ndarray]
DiffusionKernel = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Bounds:
    """Declared sup-norm bounds for a kernel pair.

    ``valid_box_half`` limits the region where the drift bound is claimed:
    kernels that are unbounded globally (the mean-field OU drift) declare a
    finite bound valid for ``|x|_inf, |y|_inf <= valid_box_half`` only.
    """

    drift: float
    diffusion: float
    valid_box_half: float = math.inf

    @property
    def global_in_x(self) -> bool:
        return math.isinf(self.valid_box_half)


@dataclass(frozen=True)
class ModulusFamily:
    """Named modulus-of-continuity family for the drift in the x variable.

    kinds: ``zero`` (constant in x), ``linear`` (rho = scale * r), ``power``
    (rho = min(r**exponent, 1)), ``log_power`` (rho = (1 + ln(1/r))**-exponent),
    ``discontinuous`` (rho = scale for r > 0) and ``table`` (interpolated).
    """

    kind: str
    scale: float = 1.0
    exponent: float = 1.0
    radii: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def rho(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "linear":
            return self.scale * r
        if self.kind == "power":
            return np.minimum(np.power(r, self.exponent, where=r > 0, out=np.zeros_like(r)), 1.0)
        if self.kind == "log_power":
            out = np.zeros_like(r)
            pos = r > 0
            rr = np.minimum(r[pos], 1.0)
            out[pos] = (1.0 - np.log(rr)) ** (-self.exponent)
            return out
        if self.kind == "discontinuous":
            return np.where(r > 0, self.scale, 0.0)
        if self.kind == "table":
            return np.interp(np.log(np.clip(r, 1e-300, None)), np.log(self.radii), self.values)
        raise ValueError(f"unknown modulus family kind {self.kind!r}")


@dataclass(frozen=True)
class KernelSpec:
    """The kernel pair (b, sigma) with its declared regularity metadata.

    Declared metadata is trusted by the hypothesis checker but spot-validated
    by sampling (see :mod:`mkvlab.regularity`); disagreement is a warning,
    not an error.
    """

    drift_kernel: DriftKernel
    diffusion_kernel: DiffusionKernel
    d: int
    d1: int
    declared_bounds: Bounds
    declared_lipschitz_y: float
    declared_lipschitz_x_sigma: float
    drift_modulus: ModulusFamily
    name: str = "custom"
    params: tuple[float, ...] = ()
    native_id: int | None = None
    native_params: tuple[float, ...] = ()
    drift_depends_y: bool = True
    diffusion_depends_y: bool = True

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("state dimension d must be >= 1")
        if self.d1 < self.d:
            raise ValueError("noise dimension d1 must be >= d")


@dataclass(frozen=True)
class CoefficientValue:
    """B, Sigma and A = Sigma Sigma^T evaluated at one (t, x, mu)."""

    drift: np.ndarray
    diffusion: np.ndarray
    diffusion_square: np.ndarray

    def validate(self, tol: float = 1e-12) -> None:
        recomputed = self.diffusion @ self.diffusion.T
        scale = max(1.0, float(np.max(np.abs(recomputed))))
        if np.max(np.abs(recomputed - self.diffusion_square)) > tol * scale:
            raise ValueError("diffusion_square does not equal diffusion @ diffusion.T")
        if np.max(np.abs(self.diffusion_square - self.diffusion_square.T)) > tol * scale:
            raise ValueError("diffusion_square is not symmetric")
        eigs = np.linalg.eigvalsh(self.diffusion_square)
        if eigs.min() < -tol * scale:
            raise ValueError("diffusion_square is not positive semidefinite")


# ---------------------------------------------------------------------------
# builtin registry
# ---------------------------------------------------------------------------


def _scaled_identity_diffusion(d: int, d1: int, scale: float) -> DiffusionKernel:
    mat = np.zeros((d, d1))
    mat[:, :d] = scale * np.eye(d)

    def diffusion(t, x, y):
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
        return np.broadcast_to(mat, shape + (d, d1))

    return diffusion


def _zero_drift(t, x, y):
    shape = np.broadcast_shapes(np.shape(x), np.shape(y))
    return np.zeros(shape)


def _ou_drift(t, x, y):
    # -(x - y), written as y - x so both backends produce identical bits.
    return np.asarray(y, float) - np.asarray(x, float)


def _make_zero_drift_unit_diffusion(params, d, d1):
    return KernelSpec(
        drift_kernel=_zero_drift,
        diffusion_kernel=_scaled_identity_diffusion(d, d1, 1.0),
        d=d,
        d1=d1,
        declared_bounds=Bounds(drift=0.0, diffusion=1.0),
        declared_lipschitz_y=0.0,
        declared_lipschitz_x_sigma=0.0,
        drift_modulus=ModulusFamily("zero"),
        name="zero_drift_unit_diffusion",
        drift_depends_y=False,
        diffusion_depends_y=False,
    )


def _make_mean_field_ou(params, d, d1):
    # b(t,x,y) = -(x - y) is unbounded globally; the declared drift bound is
    # the effective one on the probe box |x|,|y| <= 4.
    return KernelSpec(
        drift_kernel=_ou_drift,
        diffusion_kernel=_scaled_identity_diffusion(d, d1, 1.0),
        d=d,
        d1=d1,
        declared_bounds=Bounds(drift=8.0, diffusion=1.0, valid_box_half=4.0),
        declared_lipschitz_y=1.0,
        declared_lipschitz_x_sigma=0.0,
        drift_modulus=ModulusFamily("linear", scale=1.0),
        name="mean_field_ou",
        native_id=NATIVE_MEAN_FIELD_OU,
        drift_depends_y=True,
        diffusion_depends_y=False,
    )


def _make_bounded_tanh_attraction(params, d, d1):
    a = float(params[0]) if len(params) > 0 else 1.0
    s = float(params[1]) if len(params) > 1 else 1.0
    if s <= 0:
        raise ValueError("bounded_tanh_attraction requires a positive diffusion scale")

    def drift(t, x, y):
        return a * np.tanh(np.asarray(y, float) - np.asarray(x, float))

    return KernelSpec(
        drift_kernel=drift,
        diffusion_kernel=_scaled_identity_diffusion(d, d1, s),
        d=d,
        d1=d1,
        declared_bounds=Bounds(drift=abs(a) * math.sqrt(d), diffusion=s),
        declared_lipschitz_y=abs(a),
        declared_lipschitz_x_sigma=0.0,
        drift_modulus=ModulusFamily("linear", scale=abs(a)),
        name="bounded_tanh_attraction",
        params=(a, s),
        native_id=NATIVE_TANH_ATTRACTION,
        native_params=(a,),
        drift_depends_y=True,
        diffusion_depends_y=False,
    )


def _make_dini_power_drift(params, d, d1):
    if len(params) != 1:
        raise ValueError("dini_power_drift takes exactly one parameter alpha")
    alpha = float(params[0])
    if not 0.0 < alpha <= 1.0:
        raise ValueError("dini_power_drift requires 0 < alpha <= 1")

    def drift(t, x, y):
        x = np.asarray(x, float)
        return np.minimum(np.abs(x), 1.0) ** alpha

    return KernelSpec(
        drift_kernel=drift,
        diffusion_kernel=_scaled_identity_diffusion(d, d1, 1.0),
        d=d,
        d1=d1,
        declared_bounds=Bounds(drift=math.sqrt(d), diffusion=1.0),
        declared_lipschitz_y=0.0,
        declared_lipschitz_x_sigma=0.0,
        drift_modulus=ModulusFamily("power", exponent=alpha),
        name="dini_power_drift",
        params=(alpha,),
        drift_depends_y=False,
        diffusion_depends_y=False,
    )


def _make_log_modulus_drift(params, d, d1):
    if len(params) != 1:
        raise ValueError("log_modulus_drift takes exactly one parameter beta")
    beta = float(params[0])
    if beta <= 0:
        raise ValueError("log_modulus_drift requires beta > 0")

    def drift(t, x, y):
        x = np.asarray(x, float)
        r = np.minimum(np.abs(x), 1.0)
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = (1.0 - np.log(r[pos])) ** (-beta)
        return out

    return KernelSpec(
        drift_kernel=drift,
        diffusion_kernel=_scaled_identity_diffusion(d, d1, 1.0),
        d=d,
        d1=d1,
        declared_bounds=Bounds(drift=math.sqrt(d), diffusion=1.0),
        declared_lipschitz_y=0.0,
        declared_lipschitz_x_sigma=0.0,
        drift_modulus=ModulusFamily("log_power", exponent=beta),
        name="log_modulus_drift",
        params=(beta,),
        drift_depends_y=False,
        diffusion_depends_y=False,
    )


def _make_degenerate_diffusion(params, d, d1):
    def drift(t, x, y):
        return np.sign(np.asarray(x, float))

    def diffusion(t, x, y):
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
        return np.zeros(shape + (d, d1))

    return KernelSpec(
        drift_kernel=drift,
        diffusion_kernel=diffusion,
        d=d,
        d1=d1,
        declared_bounds=Bounds(drift=math.sqrt(d), diffusion=0.0),
        declared_lipschitz_y=0.0,
        declared_lipschitz_x_sigma=0.0,
        drift_modulus=ModulusFamily("discontinuous", scale=2.0),
        name="degenerate_diffusion",
        drift_depends_y=False,
        diffusion_depends_y=False,
    )


def _make_constant_drift(params, d, d1):
    if len(params) != 1:
        raise ValueError("constant_drift takes exactly one parameter b0")
    b0 = float(params[0])

    def drift(t, x, y):
        shape = np.broadcast_shapes(np.shape(x), np.shape(y))
        return np.full(shape, b0)

    return KernelSpec(
        drift_kernel=drift,
        diffusion_kernel=_scaled_identity_diffusion(d, d1, 1.0),
        d=d,
        d1=d1,
        declared_bounds=Bounds(drift=abs(b0) * math.sqrt(d), diffusion=1.0),
        declared_lipschitz_y=0.0,
        declared_lipschitz_x_sigma=0.0,
        drift_modulus=ModulusFamily("zero"),
        name="constant_drift",
        params=(b0,),
        drift_depends_y=False,
        diffusion_depends_y=False,
    )


BUILTIN_KERNELS = {
    "zero_drift_unit_diffusion": _make_zero_drift_unit_diffusion,
    "mean_field_ou": _make_mean_field_ou,
    "bounded_tanh_attraction": _make_bounded_tanh_attraction,
    "dini_power_drift": _make_dini_power_drift,
    "log_modulus_drift": _make_log_modulus_drift,
    "degenerate_diffusion": _make_degenerate_diffusion,
    "constant_drift": _make_constant_drift,
}


def builtin_kernel(name: str, params=(), d: int = 1, d1: int | None = None) -> KernelSpec:
    """Construct a registry kernel with fully populated metadata."""
    if name not in BUILTIN_KERNELS:
        known = ", ".join(sorted(BUILTIN_KERNELS))
        raise UnknownKernelError(f"unknown kernel {name!r}; registry: {known}")
    if d1 is None:
        d1 = d
    return BUILTIN_KERNELS[name](tuple(params), d, d1)


# ---------------------------------------------------------------------------
# measure functionals
# ---------------------------------------------------------------------------


def _as_points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        if d != 1:
            raise ValueError(f"scalar x given but d={d}")
        x = x.reshape(1, 1)
        return x
    if x.ndim == 1:
        if x.shape[0] != d:
            raise ValueError(f"x has dimension {x.shape[0]}, kernel has d={d}")
        return x.reshape(1, d)
    if x.shape[-1] != d:
        raise ValueError(f"x has dimension {x.shape[-1]}, kernel has d={d}")
    return np.ascontiguousarray(x.reshape(-1, d))


def _check_measure(mu: EmpiricalMeasure, d: int) -> None:
    if mu is None or mu.points.shape[0] == 0:
        raise EmptyMeasureError("empty measure")
    if mu.points.shape[1] != d:
        raise ValueError(f"measure atoms have dimension {mu.points.shape[1]}, kernel has d={d}")


def _raise_overflow(kind: str, kernel, t, xs, mu):
    # Locate one offending (t, x, y_j) triple for the error message.
    for j, y in enumerate(mu.points):
        vals = np.asarray(kernel(t, xs, y), dtype=float)
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals.reshape(xs.shape[0], -1)))[0][0]
            raise KernelOverflowError(
                f"kernel overflow in {kind} at t={t!r}, x={xs[bad].tolist()!r}, "
                f"y_{j}={y.tolist()!r}"
            )
    raise KernelOverflowError(f"kernel overflow in {kind} at t={t!r} (non-finite accumulation)")


def drift_functional_batch(spec: KernelSpec, t: float, xs, mu: EmpiricalMeasure) -> np.ndarray:
    """B[t, x_i, mu] for a batch of points x_i; returns (n, d)."""
    _check_measure(mu, spec.d)
    xs = _as_points(xs, spec.d)
    if not spec.drift_depends_y:
        base = np.asarray(spec.drift_kernel(t, xs, mu.points[0]), dtype=np.float64)
        out = base.reshape(xs.shape[0], spec.d) * ordered_sum(mu.weights)
    else:
        out = backends.pair_drift_sum(spec, t, xs, mu.points, mu.weights)
    if not np.all(np.isfinite(out)):
        _raise_overflow("drift", spec.drift_kernel, t, xs, mu)
    return out


def diffusion_functional_batch(spec: KernelSpec, t: float, xs, mu: EmpiricalMeasure) -> np.ndarray:
    """Sigma[t, x_i, mu] for a batch of points x_i; returns (n, d, d1)."""
    _check_measure(mu, spec.d)
    xs = _as_points(xs, spec.d)
    if not spec.diffusion_depends_y:
        base = np.asarray(spec.diffusion_kernel(t, xs, mu.points[0]), dtype=np.float64)
        out = base.reshape(xs.shape[0], spec.d, spec.d1) * ordered_sum(mu.weights)
    else:
        out = backends.pair_diffusion_sum(spec, t, xs, mu.points, mu.weights)
    if not np.all(np.isfinite(out)):
        _raise_overflow("diffusion", spec.diffusion_kernel, t, xs, mu)
    return out


def drift_functional(spec: KernelSpec, t: float, x, mu: EmpiricalMeasure) -> np.ndarray:
    """B[t, x, mu] = sum_j w_j b(t, x, y_j)."""
    return drift_functional_batch(spec, t, x, mu)[0]


def diffusion_functional(spec: KernelSpec, t: float, x, mu: EmpiricalMeasure) -> np.ndarray:
    """Sigma[t, x, mu] = sum_j w_j sigma(t, x, y_j)."""
    return diffusion_functional_batch(spec, t, x, mu)[0]


def diffusion_square(spec: KernelSpec, t: float, x, mu: EmpiricalMeasure) -> np.ndarray:
    """A[t, x, mu] = Sigma Sigma^T; symmetric positive semidefinite."""
    sig = diffusion_functional(spec, t, x, mu)
    return sig @ sig.T


def coefficient_value(spec: KernelSpec, t: float, x, mu: EmpiricalMeasure) -> CoefficientValue:
    sig = diffusion_functional(spec, t, x, mu)
    return CoefficientValue(
        drift=drift_functional(spec, t, x, mu),
        diffusion=sig,
        diffusion_square=sig @ sig.T,
    )
