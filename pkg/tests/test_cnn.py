"""Network construction, forward trace, and backward-pass tests.

The backward pass gets an in-test finite-difference oracle in float64,
independent of the packaged gradient checker.
"""
import numpy as np
import pytest
from scipy import signal

from convelm import cnn


def test_parse_arch_single_and_multi_stage():
    spec = cnn.parse_arch("6c-2s-12c-2s", 5, 28)
    assert spec.stages == ((6, 2), (12, 2))
    assert spec.sides == (28, 12, 4)
    assert spec.hidden_dim == 12 * 4 * 4
    assert spec.text == "6c-2s-12c-2s"
    one = cnn.parse_arch("3c-2s", 5, 28)
    assert one.hidden_dim == 3 * 12 * 12


@pytest.mark.parametrize("bad", [
    "", "6c", "2s", "6c-2s-", "-6c-2s", "6C-2s", "6c-2S", "6c_2s",
    "6c-2s-12c", "c-s", "6c--2s", "6.5c-2s",
])
def test_parse_arch_rejects_malformed_text(bad):
    with pytest.raises(ValueError):
        cnn.parse_arch(bad, 5, 28)


def test_parse_arch_rejects_impossible_geometry():
    with pytest.raises(ValueError):
        cnn.parse_arch("6c-5s", 5, 28)  # conv side 24, 24 % 5 != 0
    with pytest.raises(ValueError):
        cnn.parse_arch("6c-2s-12c-2s", 15, 28)  # second conv underflows


def test_parse_arch_non_square_pool_scale():
    spec = cnn.parse_arch("6c-3s", 5, 28)  # conv side 24, 24 / 3 = 8
    assert spec.hidden_dim == 6 * 8 * 8


def test_init_params_bounds_and_determinism():
    spec = cnn.parse_arch("6c-2s-12c-2s", 5, 28)
    params = cnn.init_params(spec, 9)
    again = cnn.init_params(spec, 9)
    other = cnn.init_params(spec, 10)
    fan_pairs = [(1, 6), (6, 12)]
    for (W, b), (c_in, c_out) in zip(params, fan_pairs):
        lim = np.sqrt(6.0 / ((c_in + c_out) * 5 * 5))
        assert W.dtype == np.float32
        assert W.shape == (c_out, c_in, 5, 5)
        assert np.all(np.abs(W) <= lim)
        assert W.std() > lim / 4  # actually spread, not degenerate
        np.testing.assert_array_equal(b, np.zeros(c_out, np.float32))
    for (a, _), (b, _) in zip(params, again):
        np.testing.assert_array_equal(a, b)
    assert not np.array_equal(params[0][0], other[0][0])


def test_forward_shapes_and_flatten_order(tiny_spec, tiny_params, tiny_batch):
    trace = cnn.forward(tiny_params, tiny_batch, tiny_spec)
    assert trace.pre_acts[0].shape == (5, 2, 6, 6)
    assert trace.pooled[0].shape == (5, 2, 3, 3)
    # features is the final pooled block; its C-order flatten is
    # map-major, then rows, then columns
    feats = trace.features
    assert feats is trace.pooled[-1]
    flat = feats.reshape(5, -1)
    assert flat.shape == (5, tiny_spec.hidden_dim)
    assert flat[0, 0] == feats[0, 0, 0, 0]
    assert flat[0, 1] == feats[0, 0, 0, 1]
    assert flat[0, 9] == feats[0, 1, 0, 0]


def test_forward_matches_hand_rolled_pipeline(tiny_spec, tiny_params, tiny_batch):
    trace = cnn.forward(tiny_params, tiny_batch, tiny_spec)
    x = tiny_batch.astype(np.float64)
    k = tiny_params[0][0].astype(np.float64)
    b = tiny_params[0][1].astype(np.float64)
    for n in range(2):
        for o in range(2):
            z = b[o] + signal.correlate2d(x[n, 0], k[o, 0], mode="valid")
            a = np.maximum(z, 0.0)
            pooled = a.reshape(3, 2, 3, 2).mean(axis=(1, 3))
            np.testing.assert_allclose(trace.pre_acts[0][n, o], z, atol=1e-6)
            np.testing.assert_allclose(trace.pooled[0][n, o], pooled, atol=1e-6)


def test_forward_validates_input_shape(tiny_spec, tiny_params):
    with pytest.raises(ValueError):
        cnn.forward(tiny_params, np.zeros((2, 1, 9, 9), np.float32), tiny_spec)
    with pytest.raises(ValueError):
        cnn.forward(tiny_params, np.zeros((2, 3, 8, 8), np.float32), tiny_spec)


def test_backward_matches_finite_differences():
    # float64 end to end so the comparison is limited by truncation only
    spec = cnn.parse_arch("2c-2s-2c-2s", 3, 14)
    params = [(W.astype(np.float64), b.astype(np.float64))
              for W, b in cnn.init_params(spec, 3)]
    rng = np.random.default_rng(12)
    x = rng.random((3, 1, 14, 14))
    g = rng.standard_normal((3, spec.hidden_dim))

    def clone(ps):
        return [(W.copy(), b.copy()) for W, b in ps]

    def cost(ps):
        feats = cnn.forward(ps, x, spec).features.reshape(3, -1)
        return float(np.sum(feats * g))

    trace = cnn.forward(params, x, spec)
    grads = cnn.backward(params, trace, g)
    eps = 1e-6
    for layer in range(2):
        k = params[layer][0]
        for idx in [(0,) * k.ndim, tuple(d - 1 for d in k.shape)]:
            hi, lo = clone(params), clone(params)
            hi[layer][0][idx] += eps
            lo[layer][0][idx] -= eps
            fd = (cost(hi) - cost(lo)) / (2 * eps)
            assert grads[layer][0][idx] == pytest.approx(fd, rel=1e-5, abs=1e-7)
        for bi in range(params[layer][1].size):
            hi, lo = clone(params), clone(params)
            hi[layer][1][bi] += eps
            lo[layer][1][bi] -= eps
            fd = (cost(hi) - cost(lo)) / (2 * eps)
            assert grads[layer][1][bi] == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_backward_accepts_flat_or_block_gradient(tiny_spec, tiny_params, tiny_batch):
    trace = cnn.forward(tiny_params, tiny_batch, tiny_spec)
    rng = np.random.default_rng(13)
    flat = rng.standard_normal((5, tiny_spec.hidden_dim)).astype(np.float32)
    block = flat.reshape(trace.pooled[-1].shape)
    g1 = cnn.backward(tiny_params, trace, flat)
    g2 = cnn.backward(tiny_params, trace, block)
    for (aw, ab), (bw, bb) in zip(g1, g2):
        np.testing.assert_array_equal(aw, bw)
        np.testing.assert_array_equal(ab, bb)


def test_backward_gradients_are_raw_batch_sums(tiny_spec, tiny_params):
    # doubling the batch by repetition doubles the summed gradient
    rng = np.random.default_rng(14)
    x = rng.random((4, 1, 8, 8)).astype(np.float32)
    g = rng.standard_normal((4, tiny_spec.hidden_dim)).astype(np.float32)
    t1 = cnn.forward(tiny_params, x, tiny_spec)
    g1 = cnn.backward(tiny_params, t1, g)
    t2 = cnn.forward(tiny_params, np.concatenate([x, x]), tiny_spec)
    g2 = cnn.backward(tiny_params, t2, np.concatenate([g, g]))
    for (aw, ab), (bw, bb) in zip(g1, g2):
        np.testing.assert_allclose(2.0 * aw, bw, rtol=2e-5, atol=1e-5)
        np.testing.assert_allclose(2.0 * ab, bb, rtol=2e-5, atol=1e-5)


def test_relu_derivative_is_zero_at_zero(tiny_spec):
    # a network whose pre-activations are exactly zero must backprop zeros
    params = [(np.zeros((2, 1, 3, 3), np.float32), np.zeros(2, np.float32))]
    spec = cnn.parse_arch("2c-2s", 3, 8)
    x = np.ones((1, 1, 8, 8), np.float32)
    trace = cnn.forward(params, x, spec)
    assert np.all(trace.pre_acts[0] == 0)
    grads = cnn.backward(params, trace, np.ones((1, spec.hidden_dim), np.float32))
    assert np.all(grads[0][0] == 0)
    assert np.all(grads[0][1] == 0)


def test_sgd_update_is_pure_and_exact(tiny_spec, tiny_params, tiny_batch):
    trace = cnn.forward(tiny_params, tiny_batch, tiny_spec)
    g = np.ones((5, tiny_spec.hidden_dim), np.float32)
    grads = cnn.backward(tiny_params, trace, g)
    before = [(W.copy(), b.copy()) for W, b in tiny_params]
    updated = cnn.sgd_update(tiny_params, grads, 0.5)
    for (W, b), (bw, bb) in zip(tiny_params, before):
        np.testing.assert_array_equal(W, bw)  # inputs untouched
        np.testing.assert_array_equal(b, bb)
    for (uw, ub), (W, b), (gW, gb) in zip(updated, tiny_params, grads):
        np.testing.assert_array_equal(uw, W - np.float32(0.5) * gW)
        np.testing.assert_array_equal(ub, b - np.float32(0.5) * gb)
