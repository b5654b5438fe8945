import math

import numpy as np
import pytest

from mkvlab.kernels import Bounds, KernelSpec, ModulusFamily, builtin_kernel
from mkvlab.particles import InitialLaw
from mkvlab.regularity import (
    ModulusTable,
    ProbePlan,
    check_hypotheses,
    continuity_modulus,
    default_radii,
    dini_integral,
    ellipticity_floor,
    estimate_modulus,
    lipschitz_estimate,
)


def _unit_diffusion(d1=1, scale=1.0):
    def diff(t, x, y):
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
        return np.broadcast_to(scale * np.eye(1, d1), shape + (1, d1))

    return diff


def _spec(drift, diffusion=None, bounds=None, modulus=None, lip_y=0.0, lip_x=0.0):
    return KernelSpec(
        drift_kernel=drift,
        diffusion_kernel=diffusion or _unit_diffusion(),
        d=1,
        d1=1,
        declared_bounds=bounds or Bounds(drift=10.0, diffusion=10.0),
        declared_lipschitz_y=lip_y,
        declared_lipschitz_x_sigma=lip_x,
        drift_modulus=modulus or ModulusFamily("linear"),
    )


class TestEstimateModulus:
    def test_constant_in_x_is_zero(self):
        spec = builtin_kernel("constant_drift", [3.0])
        table = estimate_modulus(spec, [0.01, 0.1, 1.0], seed=4)
        assert np.all(table.values == 0.0)

    def test_linear_slope_one(self):
        def drift(t, x, y):
            x = np.asarray(x, float)
            return np.broadcast_to(
                np.clip(x, -10.0, 10.0), np.broadcast_shapes(x.shape, np.shape(y))
            )

        spec = _spec(drift)
        radii = [0.01, 0.03, 0.1, 0.3, 1.0]
        table = estimate_modulus(spec, radii, seed=8)
        assert np.allclose(table.values, radii, rtol=0.05)

    def test_power_half_matches_within_ten_percent(self):
        spec = builtin_kernel("dini_power_drift", [0.5])
        radii = np.geomspace(1e-3, 1.0, 13)
        table = estimate_modulus(spec, radii, seed=2)
        assert np.allclose(table.values, np.sqrt(radii), rtol=0.10)

    def test_more_probes_never_shrink_the_estimate(self):
        spec = builtin_kernel("bounded_tanh_attraction", [1.0, 1.0])
        radii = [0.01, 0.1, 1.0]
        small = estimate_modulus(spec, radii, ProbePlan(n_probes=32), seed=6)
        large = estimate_modulus(spec, radii, ProbePlan(n_probes=256), seed=6)
        assert np.all(large.values >= small.values - 1e-15)

    def test_table_is_monotone_and_bounded(self):
        spec = builtin_kernel("bounded_tanh_attraction", [1.5, 1.0])
        table = estimate_modulus(spec, np.geomspace(1e-4, 1.0, 9), seed=1)
        assert np.all(np.diff(table.values) >= 0.0)
        assert table.values.max() <= 2.0 * spec.declared_bounds.drift + 1e-12


class TestDiniIntegral:
    # Analytic tables dense enough that quadrature, not table resolution,
    # is what the assertions exercise.

    @staticmethod
    def _table(rho, k_max=120, per_octave=8):
        radii = default_radii(k_max=k_max, per_octave=per_octave)
        return ModulusTable(
            radii=radii, values=rho(radii), n_probes=0, seed=0,
            raw_values=rho(radii),
        )

    def test_linear_modulus_integrates_to_one(self):
        table = self._table(lambda r: r)
        res = dini_integral(table, r_min=2.0**-120)
        assert not res.divergent
        assert res.value == pytest.approx(1.0, abs=0.02)

    def test_log_inverse_diverges(self):
        table = self._table(lambda r: 1.0 / (1.0 - np.log(r)))
        res = dini_integral(table, r_min=2.0**-120)
        assert res.divergent

    def test_log_inverse_squared_converges_to_one(self):
        table = self._table(lambda r: (1.0 - np.log(r)) ** -2.0)
        res = dini_integral(table, r_min=2.0**-120)
        assert not res.divergent
        assert res.value == pytest.approx(1.0, abs=0.02)

    def test_value_grows_as_r_min_falls(self):
        table = self._table(lambda r: r)
        hi = dini_integral(table, r_min=2.0**-40).value
        lo = dini_integral(table, r_min=2.0**-20).value
        assert hi >= lo

    def test_rejects_nonpositive_r_min(self):
        table = self._table(lambda r: r, k_max=20, per_octave=1)
        with pytest.raises(ValueError):
            dini_integral(table, r_min=0.0)

    def test_tail_extrapolation_is_flagged(self):
        table = self._table(lambda r: r, k_max=10, per_octave=1)
        res = dini_integral(table, r_min=2.0**-30)
        assert res.extrapolated


class TestEllipticityFloor:
    def test_identity(self):
        spec = builtin_kernel("zero_drift_unit_diffusion")
        assert ellipticity_floor(spec, seed=3) == pytest.approx(1.0, abs=1e-12)

    def test_diagonal(self):
        def diff(t, x, y):
            shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
            return np.broadcast_to(np.diag([1.0, 2.0]), shape + (2, 2))

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
        assert ellipticity_floor(spec, seed=3) == pytest.approx(1.0, abs=1e-12)

    def test_sine_floor_approached_from_above(self):
        def diff(t, x, y):
            x = np.asarray(x, float)
            shape = np.broadcast_shapes(x.shape[:-1], np.shape(y)[:-1])
            scale = np.broadcast_to(2.0 + np.sin(x[..., 0]), shape)
            return scale[..., None, None] * np.eye(1)

        spec = _spec(lambda t, x, y: np.zeros(
            np.broadcast_shapes(np.shape(x), np.shape(y))), diffusion=diff)
        few = ellipticity_floor(spec, ProbePlan(n_probes=1024), seed=5)
        many = ellipticity_floor(spec, ProbePlan(n_probes=8192), seed=5)
        assert few >= many >= 1.0
        assert many == pytest.approx(1.0, abs=0.01)

    def test_degenerate_is_zero(self):
        spec = builtin_kernel("degenerate_diffusion")
        assert ellipticity_floor(spec, seed=1) == 0.0


class TestLipschitzEstimate:
    def test_constant_functional(self):
        spec = builtin_kernel("constant_drift", [2.0])
        est = lipschitz_estimate(spec, "y-of-b", seed=12)
        assert est.constant == 0.0
        assert not est.diverging

    def test_linear_sigma_in_x(self):
        def diff(t, x, y):
            x = np.asarray(x, float)
            shape = np.broadcast_shapes(x.shape[:-1], np.shape(y)[:-1])
            scale = np.broadcast_to(np.clip(x[..., 0], -10, 10), shape)
            return scale[..., None, None] * np.eye(1)

        spec = _spec(lambda t, x, y: np.zeros(
            np.broadcast_shapes(np.shape(x), np.shape(y))), diffusion=diff, lip_x=1.0)
        est = lipschitz_estimate(spec, "x-of-sigma", ProbePlan(n_probes=512), seed=7)
        assert est.constant == pytest.approx(1.0, rel=0.05)

    def test_ou_drift_in_y(self):
        spec = builtin_kernel("mean_field_ou")
        est = lipschitz_estimate(spec, "y-of-b", ProbePlan(n_probes=512), seed=7)
        assert est.constant == pytest.approx(1.0, rel=0.05)

    def test_unknown_axis(self):
        spec = builtin_kernel("mean_field_ou")
        with pytest.raises(ValueError):
            lipschitz_estimate(spec, "t-of-b")


def test_continuity_statistic_flat_for_autonomous_unit_diffusion():
    spec = builtin_kernel("zero_drift_unit_diffusion")
    assert continuity_modulus(spec, seed=2) == pytest.approx(0.0, abs=1e-12)


class TestCheckHypotheses:
    def test_zero_drift_all_pass(self):
        report = check_hypotheses(builtin_kernel("zero_drift_unit_diffusion"))
        assert report.overall_pass
        assert [c.condition for c in report.conditions] == ["i", "ii", "iii", "iv", "v"]
        assert all(c.verdict == "not refuted" for c in report.conditions)

    def test_degenerate_fails_ellipticity(self):
        report = check_hypotheses(builtin_kernel("degenerate_diffusion"))
        assert not report.overall_pass
        assert report.condition("iii").refuted
        assert report.ellipticity == 0.0

    def test_log_modulus_fails_dini(self):
        report = check_hypotheses(builtin_kernel("log_modulus_drift", [1.0]))
        assert report.condition("v").refuted
        assert report.dini.divergent

    def test_log_modulus_squared_passes_dini(self):
        report = check_hypotheses(builtin_kernel("log_modulus_drift", [2.0]))
        assert not report.condition("v").refuted

    def test_second_moment_reported(self):
        law = InitialLaw("normal", (0.0, 2.0))
        report = check_hypotheses(builtin_kernel("zero_drift_unit_diffusion"), law)
        assert report.second_moment == pytest.approx(4.0, rel=0.05)

    def test_ou_estimates_match_declared_within_ten_percent(self):
        spec = builtin_kernel("mean_field_ou")
        report = check_hypotheses(spec)
        assert report.lipschitz_y == pytest.approx(spec.declared_lipschitz_y, rel=0.10)
        assert report.ellipticity == pytest.approx(1.0, rel=0.10)

    def test_report_serialization_shape(self):
        report = check_hypotheses(builtin_kernel("zero_drift_unit_diffusion"))
        payload = report.as_json()
        assert len(payload) == 5
        for obj in payload:
            assert set(obj) == {"condition", "verdict", "statistic", "probes", "seed"}
