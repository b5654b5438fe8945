import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mkvlab import rng
from mkvlab.errors import EmptyMeasureError
from mkvlab.measure import (
    EmpiricalMeasure,
    mean_coupling_distance,
    second_moment,
    wasserstein1_1d,
)


def test_second_moment_uniform_123():
    mu = EmpiricalMeasure(np.array([1.0, 2.0, 3.0]))
    assert second_moment(mu) == pytest.approx(14.0 / 3.0, abs=1e-15)


def test_second_moment_delta_zero():
    assert second_moment(EmpiricalMeasure(np.array([0.0]))) == 0.0


def test_second_moment_monte_carlo_normal():
    z = rng.step_normals(123, rng.STREAM_SYNTH, 0, 100_000, 1)
    mu = EmpiricalMeasure(z)
    assert second_moment(mu) == pytest.approx(1.0, abs=0.02)


def test_mean_and_covariance():
    mu = EmpiricalMeasure(np.array([[0.0, 1.0], [2.0, 3.0]]))
    assert np.allclose(mu.mean(), [1.0, 2.0])
    assert np.allclose(mu.covariance(), [[1.0, 1.0], [1.0, 1.0]])


def test_weighted_mean():
    mu = EmpiricalMeasure(np.array([0.0, 10.0]), np.array([0.75, 0.25]))
    assert mu.mean()[0] == pytest.approx(2.5)


def test_rejects_empty():
    with pytest.raises(EmptyMeasureError):
        EmpiricalMeasure(np.empty((0, 1)))


def test_rejects_bad_weights():
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.array([0.0, 1.0]), np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.array([0.0, 1.0]), np.array([1.1, -0.1]))


def test_atoms_are_frozen_copies():
    pts = np.array([[1.0], [2.0]])
    mu = EmpiricalMeasure(pts)
    pts[0, 0] = 99.0  # caller's array stays writable, measure is unaffected
    assert mu.points[0, 0] == 1.0
    with pytest.raises(ValueError):
        mu.points[0, 0] = 5.0


class TestMeanCouplingDistance:
    def test_identical(self):
        mu = EmpiricalMeasure(np.array([1.0, 2.0]))
        assert mean_coupling_distance(mu, mu, power=1) == 0.0

    def test_zero_one(self):
        mu = EmpiricalMeasure(np.array([0.0]))
        nu = EmpiricalMeasure(np.array([1.0]))
        assert mean_coupling_distance(mu, nu, power=1) == 1.0

    def test_constant_shift(self):
        base = rng.step_normals(5, rng.STREAM_SYNTH, 1, 50, 1)
        mu = EmpiricalMeasure(base)
        nu = EmpiricalMeasure(base - 2.5)
        assert mean_coupling_distance(mu, nu, power=1) == pytest.approx(2.5)

    def test_length_mismatch(self):
        mu = EmpiricalMeasure(np.array([0.0]))
        nu = EmpiricalMeasure(np.array([0.0, 1.0]))
        with pytest.raises(ValueError):
            mean_coupling_distance(mu, nu)


class TestWasserstein1d:
    def test_identical(self):
        mu = EmpiricalMeasure(np.array([3.0, -1.0, 2.0]))
        assert wasserstein1_1d(mu, mu) == 0.0

    def test_sorted_pairing(self):
        mu = EmpiricalMeasure(np.array([0.0, 1.0]))
        nu = EmpiricalMeasure(np.array([0.0, 3.0]))
        assert wasserstein1_1d(mu, nu) == pytest.approx(1.0)

    def test_point_masses(self):
        mu = EmpiricalMeasure(np.array([0.0]))
        nu = EmpiricalMeasure(np.array([1.0]))
        assert wasserstein1_1d(mu, nu) == pytest.approx(1.0)

    def test_weighted_matches_atom_split(self):
        # Splitting an atom into two half-weight copies changes nothing.
        mu = EmpiricalMeasure(np.array([0.0, 0.0, 4.0]), np.array([0.25, 0.25, 0.5]))
        nu = EmpiricalMeasure(np.array([0.0, 4.0]), np.array([0.5, 0.5]))
        assert wasserstein1_1d(mu, nu) == pytest.approx(0.0, abs=1e-15)

    def test_rejects_multid(self):
        mu = EmpiricalMeasure(np.zeros((3, 2)))
        with pytest.raises(ValueError):
            wasserstein1_1d(mu, mu)


@settings(max_examples=50, deadline=None)
@given(
    xs=st.lists(st.floats(-100, 100), min_size=2, max_size=12),
    ys=st.lists(st.floats(-100, 100), min_size=2, max_size=12),
    seed=st.integers(0, 2**32 - 1),
)
def test_w1_lower_bounds_any_coupling(xs, ys, seed):
    n = min(len(xs), len(ys))
    a = np.array(xs[:n])
    b = np.array(ys[:n])
    mu = EmpiricalMeasure(a)
    w1 = wasserstein1_1d(mu, EmpiricalMeasure(b))
    perm = np.random.default_rng(seed).permutation(n)
    coupled = mean_coupling_distance(mu, EmpiricalMeasure(b[perm]), power=1)
    assert w1 <= coupled + 1e-9 * (1 + abs(coupled))


@settings(max_examples=50, deadline=None)
@given(
    xs=st.lists(st.floats(-50, 50), min_size=1, max_size=10),
    ys=st.lists(st.floats(-50, 50), min_size=1, max_size=10),
    zs=st.lists(st.floats(-50, 50), min_size=1, max_size=10),
)
def test_w1_triangle_inequality(xs, ys, zs):
    mu = EmpiricalMeasure(np.array(xs))
    nu = EmpiricalMeasure(np.array(ys))
    pi = EmpiricalMeasure(np.array(zs))
    lhs = wasserstein1_1d(mu, pi)
    rhs = wasserstein1_1d(mu, nu) + wasserstein1_1d(nu, pi)
    assert lhs <= rhs + 1e-9 * (1 + rhs)
