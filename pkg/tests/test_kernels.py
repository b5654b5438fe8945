import math

import numpy as np
import pytest

from mkvlab import rng
from mkvlab.errors import KernelOverflowError, UnknownKernelError
from mkvlab.kernels import (
    BUILTIN_KERNELS,
    Bounds,
    KernelSpec,
    ModulusFamily,
    builtin_kernel,
    coefficient_value,
    diffusion_functional,
    diffusion_square,
    drift_functional,
)
from mkvlab.measure import EmpiricalMeasure


def _spec_1d(drift=None, diffusion=None, d1=1, lip_y=10.0):
    """Ad hoc scalar kernel spec for example-based tests."""

    def zero(t, x, y):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))

    def unit(t, x, y):
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
        return np.broadcast_to(np.eye(1, d1), shape + (1, d1))

    return KernelSpec(
        drift_kernel=drift or zero,
        diffusion_kernel=diffusion or unit,
        d=1,
        d1=d1,
        declared_bounds=Bounds(drift=100.0, diffusion=100.0),
        declared_lipschitz_y=lip_y,
        declared_lipschitz_x_sigma=10.0,
        drift_modulus=ModulusFamily("linear"),
    )


class TestDriftFunctional:
    def test_mean_of_atoms(self):
        spec = _spec_1d(drift=lambda t, x, y: np.broadcast_to(
            np.asarray(y, float), np.broadcast_shapes(np.shape(x), np.shape(y))))
        mu = EmpiricalMeasure(np.array([1.0, 2.0, 3.0]))
        out = drift_functional(spec, 0.0, np.array([0.0]), mu)
        assert out[0] == pytest.approx(2.0, abs=1e-15)

    def test_single_atom_sine(self):
        spec = _spec_1d(drift=lambda t, x, y: np.sin(
            np.asarray(x, float) - np.asarray(y, float)))
        mu = EmpiricalMeasure(np.array([0.0]))
        out = drift_functional(spec, 0.0, np.array([math.pi / 2]), mu)
        assert out[0] == pytest.approx(1.0, abs=1e-15)

    def test_quadratic_in_y(self):
        spec = _spec_1d(drift=lambda t, x, y: np.broadcast_to(
            np.asarray(y, float) ** 2, np.broadcast_shapes(np.shape(x), np.shape(y))))
        mu = EmpiricalMeasure(np.array([-1.0, 0.0, 2.0]))
        out = drift_functional(spec, 0.0, np.array([0.0]), mu)
        assert out[0] == pytest.approx(5.0 / 3.0, abs=1e-15)

    def test_overflow_names_the_triple(self):
        def bad(t, x, y):
            shape = np.broadcast_shapes(np.shape(x), np.shape(y))
            out = np.zeros(shape)
            out += np.where(np.asarray(y, float) > 1.5, np.inf, 0.0)
            return out

        spec = _spec_1d(drift=bad)
        mu = EmpiricalMeasure(np.array([0.0, 2.0]))
        with pytest.raises(KernelOverflowError, match=r"t=0.0.*y_1"):
            drift_functional(spec, 0.0, np.array([0.0]), mu)


class TestDiffusionFunctional:
    def test_identity(self):
        spec = builtin_kernel("zero_drift_unit_diffusion", d=2, d1=2)
        mu = EmpiricalMeasure(np.zeros((5, 2)))
        out = diffusion_functional(spec, 0.0, np.zeros(2), mu)
        assert np.array_equal(out, np.eye(2))

    def test_single_atom_sine_scale(self):
        def diff(t, x, y):
            y = np.asarray(y, float)
            shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
            scale = np.broadcast_to(2.0 + np.sin(y[..., 0]), shape)
            return scale[..., None, None] * np.eye(1)

        spec = _spec_1d(diffusion=diff)
        mu = EmpiricalMeasure(np.array([math.pi / 2]))
        out = diffusion_functional(spec, 0.0, np.array([0.0]), mu)
        assert out[0, 0] == pytest.approx(3.0, abs=1e-15)

    def test_mean_scale(self):
        def diff(t, x, y):
            y = np.asarray(y, float)
            shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
            return np.broadcast_to(y[..., 0], shape)[..., None, None] * np.eye(1)

        spec = _spec_1d(diffusion=diff)
        mu = EmpiricalMeasure(np.array([1.0, 3.0]))
        out = diffusion_functional(spec, 0.0, np.array([0.0]), mu)
        assert out[0, 0] == pytest.approx(2.0, abs=1e-15)


class TestDiffusionSquare:
    def test_identity(self):
        spec = builtin_kernel("zero_drift_unit_diffusion", d=2, d1=2)
        mu = EmpiricalMeasure(np.zeros((3, 2)))
        assert np.allclose(diffusion_square(spec, 0.0, np.zeros(2), mu), np.eye(2))

    def test_lower_triangular(self):
        mat = np.array([[1.0, 0.0], [1.0, 1.0]])

        def diff(t, x, y):
            shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
            return np.broadcast_to(mat, shape + (2, 2))

        spec = KernelSpec(
            drift_kernel=lambda t, x, y: np.zeros(
                np.broadcast_shapes(np.shape(x), np.shape(y))),
            diffusion_kernel=diff,
            d=2,
            d1=2,
            declared_bounds=Bounds(drift=0.0, diffusion=2.0),
            declared_lipschitz_y=0.0,
            declared_lipschitz_x_sigma=0.0,
            drift_modulus=ModulusFamily("zero"),
        )
        mu = EmpiricalMeasure(np.zeros((2, 2)))
        A = diffusion_square(spec, 0.0, np.zeros(2), mu)
        assert np.allclose(A, [[1.0, 1.0], [1.0, 2.0]])

    def test_wide_row(self):
        def diff(t, x, y):
            shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
            return np.broadcast_to(np.ones((1, 2)), shape + (1, 2))

        spec = _spec_1d(diffusion=diff, d1=2)
        mu = EmpiricalMeasure(np.array([0.0]))
        A = diffusion_square(spec, 0.0, np.array([0.0]), mu)
        assert A[0, 0] == pytest.approx(2.0)


class TestBuiltinRegistry:
    def test_zero_drift(self):
        spec = builtin_kernel("zero_drift_unit_diffusion")
        mu = EmpiricalMeasure(np.array([5.0]))
        assert drift_functional(spec, 0.0, np.array([3.0]), mu)[0] == 0.0
        assert diffusion_functional(spec, 0.0, np.array([3.0]), mu)[0, 0] == 1.0

    def test_mean_field_ou_is_minus_x_plus_y(self):
        spec = builtin_kernel("mean_field_ou")
        out = spec.drift_kernel(0.0, np.array([2.0]), np.array([0.5]))
        assert np.asarray(out)[0] == pytest.approx(-(2.0 - 0.5))

    def test_dini_power_modulus(self):
        spec = builtin_kernel("dini_power_drift", [0.5])
        r = np.array([0.04, 0.25, 4.0])
        assert np.allclose(spec.drift_modulus.rho(r), [0.2, 0.5, 1.0])

    def test_unknown_name_lists_registry(self):
        with pytest.raises(UnknownKernelError) as err:
            builtin_kernel("not_a_kernel")
        for name in BUILTIN_KERNELS:
            assert name in str(err.value)

    def test_d1_must_cover_d(self):
        with pytest.raises(ValueError):
            builtin_kernel("zero_drift_unit_diffusion", d=2, d1=1)


def test_linearity_in_the_measure():
    spec = builtin_kernel("bounded_tanh_attraction", [1.5, 1.0])
    n = 64
    ya = rng.step_normals(21, rng.STREAM_SYNTH, 0, n, 1)
    yb = rng.step_normals(21, rng.STREAM_SYNTH, 1, n, 1)
    x = np.array([0.3])
    lam = 0.375
    mu = EmpiricalMeasure(ya)
    nu = EmpiricalMeasure(yb)
    mix = EmpiricalMeasure(
        np.vstack([ya, yb]),
        np.concatenate([np.full(n, lam / n), np.full(n, (1 - lam) / n)]),
    )
    lhs = drift_functional(spec, 0.0, x, mix)
    rhs = lam * drift_functional(spec, 0.0, x, mu) + (1 - lam) * drift_functional(
        spec, 0.0, x, nu
    )
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * 2 * n


def test_lipschitz_in_measure_bound():
    spec = builtin_kernel("bounded_tanh_attraction", [2.0, 1.0])
    n = 128
    xi1 = rng.step_normals(33, rng.STREAM_SYNTH, 2, n, 1)
    xi2 = xi1 + 0.1 * rng.step_normals(33, rng.STREAM_SYNTH, 3, n, 1)
    mu = EmpiricalMeasure(xi1)
    nu = EmpiricalMeasure(xi2)
    x = np.array([0.0])
    gap = np.abs(
        drift_functional(spec, 0.0, x, mu) - drift_functional(spec, 0.0, x, nu)
    )[0]
    mean_dist = float(np.mean(np.abs(xi1 - xi2)))
    assert gap <= spec.declared_lipschitz_y * mean_dist + 1e-12


@pytest.mark.parametrize("name,params", [
    ("zero_drift_unit_diffusion", ()),
    ("mean_field_ou", ()),
    ("bounded_tanh_attraction", (1.0, 0.8)),
    ("dini_power_drift", (0.5,)),
    ("log_modulus_drift", (2.0,)),
    ("degenerate_diffusion", ()),
    ("constant_drift", (4.0,)),
])
def test_diffusion_square_psd_on_random_draws(name, params):
    spec = builtin_kernel(name, params)
    us = rng.step_uniforms(77, rng.STREAM_SYNTH, 4, 1000, 3)
    for k in range(0, 1000, 50):  # 20 full coefficient evaluations per kernel
        t, ux, uy = us[k]
        mu = EmpiricalMeasure(np.array([8.0 * uy - 4.0]))
        value = coefficient_value(spec, t, np.array([8.0 * ux - 4.0]), mu)
        value.validate()
    # cheap PSD-only sweep over all 1000 draws
    for t, ux, uy in us:
        mu = EmpiricalMeasure(np.array([8.0 * uy - 4.0]))
        A = diffusion_square(spec, t, np.array([8.0 * ux - 4.0]), mu)
        assert np.linalg.eigvalsh(A).min() >= -1e-12


def test_bounded_outputs_match_declared_bounds():
    spec = builtin_kernel("bounded_tanh_attraction", [1.0, 1.0])
    us = rng.step_uniforms(7, rng.STREAM_SYNTH, 5, 200, 3)
    for t, ux, uy in us:
        mu = EmpiricalMeasure(np.array([20.0 * uy - 10.0]))
        b = drift_functional(spec, t, np.array([20.0 * ux - 10.0]), mu)
        s = diffusion_functional(spec, t, np.array([20.0 * ux - 10.0]), mu)
        assert np.linalg.norm(b) <= spec.declared_bounds.drift + 1e-12
        assert np.linalg.norm(s) <= spec.declared_bounds.diffusion + 1e-12
