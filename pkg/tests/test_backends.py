"""Compiled core vs pure-numpy fallback: same bits, any thread count."""

import numpy as np
import pytest

from mkvlab import _config, _purecore, backends, rng
from mkvlab.kernels import builtin_kernel

pytestmark = pytest.mark.skipif(
    not backends.compiled_available(), reason="compiled core not built"
)


def _cloud(n, step):
    xs = rng.step_normals(3, rng.STREAM_SYNTH, step, n, 1)
    ys = rng.step_normals(3, rng.STREAM_SYNTH, step + 1, n, 1)
    ws = np.full(n, 1.0 / n)
    return xs, ys, ws


def test_ou_drift_bitwise_equal():
    spec = builtin_kernel("mean_field_ou")
    xs, ys, ws = _cloud(700, 0)
    compiled = backends.pair_drift_sum(spec, 0.0, xs, ys, ws)
    fallback = _purecore.pair_drift_sum(spec, 0.0, xs, ys, ws)
    assert np.array_equal(compiled, fallback)


def test_tanh_drift_close_across_backends():
    # libm tanh and numpy tanh may differ in the last ulp, so the contract
    # for this kernel is allclose across backends, bitwise within each.
    spec = builtin_kernel("bounded_tanh_attraction", [1.3, 1.0])
    xs, ys, ws = _cloud(500, 2)
    compiled = backends.pair_drift_sum(spec, 0.0, xs, ys, ws)
    fallback = _purecore.pair_drift_sum(spec, 0.0, xs, ys, ws)
    assert np.allclose(compiled, fallback, rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("threads", [2, 4])
def test_thread_count_does_not_change_bits(threads):
    spec = builtin_kernel("mean_field_ou")
    xs, ys, ws = _cloud(1500, 4)
    saved = _config.get_num_threads()
    try:
        _config.set_num_threads(1)
        one = backends.pair_drift_sum(spec, 0.0, xs, ys, ws)
        _config.set_num_threads(threads)
        many = backends.pair_drift_sum(spec, 0.0, xs, ys, ws)
    finally:
        _config.set_num_threads(saved)
    assert np.array_equal(one, many)


def test_weighted_sums_match():
    spec = builtin_kernel("mean_field_ou")
    xs, ys, _ = _cloud(300, 6)
    raw = rng.step_uniforms(9, rng.STREAM_SYNTH, 8, 300, 1).ravel()
    ws = raw / raw.sum()
    compiled = backends.pair_drift_sum(spec, 0.0, xs, ys, ws)
    fallback = _purecore.pair_drift_sum(spec, 0.0, xs, ys, ws)
    assert np.array_equal(compiled, fallback)


def test_read_only_inputs_accepted():
    spec = builtin_kernel("mean_field_ou")
    xs, ys, ws = _cloud(64, 10)
    for arr in (xs, ys, ws):
        arr.setflags(write=False)
    out = backends.pair_drift_sum(spec, 0.0, xs, ys, ws)
    assert out.shape == (64, 1)
