import numpy as np
import pytest
from scipy.ndimage import binary_dilation
from scipy.signal import correlate2d

from domino_denoise.nnet import (
    AdamState,
    Network,
    _im2col,
    adam_step,
    bce_logit_grad,
    bce_loss,
    init_network,
    partial_conv_forward,
    sigmoid,
)


def plain_cnn(net: Network, x: np.ndarray) -> np.ndarray:
    """Zero-padded standard CNN evaluation, one 2D correlation per channel pair."""
    a = x[None]
    for w, b in zip(net.weights, net.biases):
        z = np.zeros((w.shape[0],) + x.shape)
        for o in range(w.shape[0]):
            for i in range(w.shape[1]):
                z[o] += correlate2d(a[i], w[o, i], mode="same", boundary="fill")
            z[o] += b[o]
        a = np.maximum(z, 0.0)
    logits = np.tensordot(net.head_weight[0], a, axes=1) + net.head_bias[0]
    return 1.0 / (1.0 + np.exp(-logits))


def random_net(seed, channels, n_layers, scale=0.1):
    net = init_network(seed, channels, n_layers)
    r = np.random.default_rng(seed + 1)
    for p in net.parameters():
        p += r.normal(0.0, scale, p.shape)
    return net


def numeric_grads(net, x, mask, target, sel, h=1e-5):
    out = []
    for p in net.parameters():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            lp = bce_loss(net.forward(x, mask), target, sel)
            p[idx] = old - h
            lm = bce_loss(net.forward(x, mask), target, sel)
            p[idx] = old
            g[idx] = (lp - lm) / (2 * h)
        out.append(g)
    return out


def max_rel_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        den = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - n) / den)))
    return worst


def test_im2col_layout(rng):
    x = rng.random((2, 4, 5))
    cols = _im2col(x)
    pad = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    c, ky, kx, i, j = 1, 2, 0, 3, 4
    assert cols[c * 9 + ky * 3 + kx, i * 5 + j] == pad[c, i + ky, j + kx]


def test_pconv_all_ones_is_plain_conv(rng):
    x = rng.random((2, 7, 6))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    y, m = partial_conv_forward(x, np.ones((7, 6)), w, b)
    ref = np.stack([sum(correlate2d(x[i], w[o, i], mode="same") for i in range(2)) + b[o] for o in range(3)])
    np.testing.assert_allclose(y, ref, atol=1e-12)
    assert np.all(m == 1)


def test_pconv_all_zero_mask(rng):
    y, m = partial_conv_forward(rng.random((1, 5, 5)), np.zeros((5, 5)), rng.normal(size=(2, 1, 3, 3)), np.ones(2))
    assert np.all(y == 0) and np.all(m == 0)


def test_pconv_single_pixel_renormalisation():
    x = np.zeros((1, 7, 7))
    x[0, 3, 3] = 0.5
    mask = np.zeros((7, 7))
    mask[3, 3] = 1.0
    y, m = partial_conv_forward(x, mask, np.ones((1, 1, 3, 3)), np.zeros(1))
    touched = np.zeros((7, 7), dtype=bool)
    touched[2:5, 2:5] = True
    np.testing.assert_allclose(y[0][touched], 9 * 0.5)
    assert np.all(y[0][~touched] == 0)
    np.testing.assert_array_equal(m, touched)


def test_pconv_mask_dilation(rng):
    for _ in range(10):
        mask = rng.random((9, 8)) > 0.8
        _, m = partial_conv_forward(rng.random((9, 8)), mask, rng.normal(size=(1, 1, 3, 3)), np.zeros(1))
        np.testing.assert_array_equal(m.astype(bool), binary_dilation(mask, np.ones((3, 3))))


def test_pconv_shape_errors(rng):
    with pytest.raises(ValueError):
        partial_conv_forward(rng.random((2, 4, 4)), np.ones((4, 4)), np.zeros((1, 3, 3, 3)), np.zeros(1))
    with pytest.raises(ValueError):
        partial_conv_forward(rng.random((1, 4, 4)), np.ones((4, 5)), np.zeros((1, 1, 3, 3)), np.zeros(1))


def test_network_matches_plain_cnn(rng):
    net = random_net(3, 4, 12, scale=0.05)
    x = rng.random((9, 11))
    np.testing.assert_allclose(net.forward(x)[0], plain_cnn(net, x), atol=1e-12)


def test_forward_range_shape_purity(rng):
    net = init_network(0, 6, 3)
    x = rng.random((10, 12))
    mask = rng.random((10, 12)) > 0.2
    a = net.forward(x * mask, mask)
    assert a.shape == (1, 10, 12)
    assert np.all((a > 0) & (a < 1))
    assert np.array_equal(a, net.forward(x * mask, mask))


def test_gradient_check_2layer(rng):
    net = random_net(7, 4, 2)
    x = rng.random((8, 8))
    mask = (rng.random((8, 8)) > 0.3).astype(float)
    target = rng.random((8, 8))
    sel = rng.random((8, 8)) > 0.5
    out = net.forward(x * mask, mask)
    grads = net.backward(bce_logit_grad(out, target, sel))
    num = numeric_grads(net, x * mask, mask, target, sel)
    assert max_rel_error(grads, num) < 1e-4


def test_zero_gradient_at_saturated_match(rng):
    net = init_network(1, 4, 2)
    net.head_bias[:] = -60.0  # p ~ 1e-26, below the clamp
    x = rng.random((6, 6))
    out = net.forward(x)
    grads = net.backward(bce_logit_grad(out, np.zeros((6, 6)), np.ones((6, 6), dtype=bool)))
    assert all(np.all(np.abs(g) <= 1e-12) for g in grads)


def test_hidden_receptive_field_gives_zero_conv_gradient(rng):
    net = random_net(2, 3, 1)
    x = rng.random((7, 7))
    mask = np.ones((7, 7))
    mask[2:5, 2:5] = 0.0  # window of (3, 3) fully masked
    sel = np.zeros((7, 7), dtype=bool)
    sel[3, 3] = True
    out = net.forward(x * mask, mask)
    grads = net.backward(bce_logit_grad(out, x, sel))
    assert np.all(grads[0] == 0) and np.all(grads[1] == 0)
    assert grads[-1][0] != 0


def test_backward_requires_forward():
    with pytest.raises(RuntimeError):
        init_network(0, 2, 1).backward(np.zeros((1, 2, 2)))


def test_bce_values():
    assert bce_loss(np.array([0.5]), np.array([0.5]), np.array([True])) == pytest.approx(np.log(2), abs=1e-12)
    p = np.array([1e-12, 1 - 1e-12])
    assert bce_loss(p, np.array([0.0, 1.0]), np.ones(2, bool)) < 1e-6
    with pytest.raises(ValueError):
        bce_loss(np.array([0.5]), np.array([0.5]), np.array([False]))


def test_bce_ignores_unselected(rng):
    p, t = rng.random(20), rng.random(20)
    sel = rng.random(20) > 0.5
    t2 = t.copy()
    t2[~sel] = rng.random(np.count_nonzero(~sel))
    assert bce_loss(p, t, sel) == bce_loss(p, t2, sel)


def test_sigmoid_stable():
    z = np.array([-1000.0, 0.0, 1000.0])
    np.testing.assert_array_equal(sigmoid(z), [0.0, 0.5, 1.0])


def test_adam_zero_grad_and_unit_step():
    p = [np.array([1.0, -2.0])]
    adam_step(p, [np.zeros(2)], AdamState())
    np.testing.assert_array_equal(p[0], [1.0, -2.0])
    state = AdamState(lr=1e-3)
    q = [np.zeros(3)]
    for _ in range(200):
        before = q[0].copy()
        adam_step(q, [np.full(3, 0.37)], state)
    assert state.step == 200
    np.testing.assert_allclose(before - q[0], 1e-3, rtol=1e-6)
    with pytest.raises(ValueError):
        adam_step([np.zeros(2)], [np.zeros(3)], AdamState())


def test_init_network(rng):
    a, b, c = init_network(5, 8, 3), init_network(5, 8, 3), init_network(6, 8, 3)
    for pa, pb, pc in zip(a.parameters(), b.parameters(), c.parameters()):
        assert np.array_equal(pa, pb)
    assert any(not np.array_equal(pa, pc) for pa, pc in zip(a.parameters(), c.parameters()) if pa.any())
    for w in a.weights:
        fan_in = w.shape[1] * 9
        assert np.all(np.abs(w) <= np.sqrt(6 / fan_in))
    assert np.all(np.abs(a.head_weight) <= np.sqrt(6 / 8))
    assert all(np.all(bias == 0) for bias in a.biases)
    assert a.n_layers == 3 and a.channels == 8
    assert init_network(0).n_layers == 12 and init_network(0).channels == 48


def test_checkpoint_roundtrip(tmp_path, rng):
    net = random_net(4, 3, 2)
    path = tmp_path / "w.ddnn"
    net.save(path)
    raw = path.read_bytes()
    assert raw[:4] == b"DDNN"
    back = Network.load(path)
    for p, q in zip(net.parameters(), back.parameters()):
        assert np.array_equal(p, q)
    x = rng.random((5, 5))
    assert np.array_equal(net.forward(x), back.forward(x))
    with pytest.raises(ValueError):
        Network.from_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        Network.from_bytes(raw[:-8])
