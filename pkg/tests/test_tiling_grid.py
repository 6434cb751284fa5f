import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from domino_denoise.tiling import (
    Crop,
    Parity,
    Tiling,
    checkerboard_downsample,
    crop,
    domino_tiling,
    pad_to_even,
    pixel_domino_pair,
    render_tiling,
    verify_tiling,
)


def brick_4x4() -> Tiling:
    pairs = []
    for i in range(4):
        pairs += [(i, 0, i, 1), (i, 2, i, 3)]
    return Tiling(np.array(pairs), 4, 4)


def test_parity_mask_and_coerce():
    m = Parity.EVEN.mask(2, 3)
    np.testing.assert_array_equal(m, [[1, 0, 1], [0, 1, 0]])
    assert Parity.coerce("odd") is Parity.ODD
    assert Parity.coerce(0) is Parity.EVEN
    assert Parity.EVEN.other is Parity.ODD
    assert np.all(Parity.EVEN.mask(5, 4) ^ Parity.ODD.mask(5, 4))


def test_checkerboard_example():
    x = np.array([[1, 2, 3, 4], [5, 6, 7, 8]], dtype=float)
    even, odd = checkerboard_downsample(x)
    np.testing.assert_array_equal(even, [[1, 3], [6, 8]])
    np.testing.assert_array_equal(odd, [[2, 4], [5, 7]])


def test_checkerboard_constant_and_odd_width():
    even, odd = checkerboard_downsample(np.full((3, 6), 0.4))
    assert np.all(even == 0.4) and np.all(odd == 0.4)
    assert even.shape == (3, 3)
    with pytest.raises(ValueError):
        checkerboard_downsample(np.zeros((2, 3)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 9), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_checkerboard_partitions_pixels(h, half_w, seed):
    x = np.random.default_rng(seed).random((h, 2 * half_w))
    even, odd = checkerboard_downsample(x)
    np.testing.assert_array_equal(np.sort(np.concatenate([even.ravel(), odd.ravel()])), np.sort(x.ravel()))
    np.testing.assert_array_equal(np.sort(even.ravel()), np.sort(x[Parity.EVEN.mask(*x.shape)]))


def test_pad_to_even_shapes():
    x = np.arange(16.0).reshape(4, 4)
    p, info = pad_to_even(x)
    assert p.shape == (4, 4) and info == Crop(4, 4)
    p, info = pad_to_even(np.arange(9.0).reshape(3, 3))
    assert p.shape == (4, 4)
    # mirrored border: the new row/column repeats the last one
    np.testing.assert_array_equal(p[3, :3], [6, 7, 8])
    np.testing.assert_array_equal(p[:3, 3], [2, 5, 8])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 9), st.integers(1, 9))
def test_crop_inverts_pad(h, w):
    x = np.random.default_rng(h * 10 + w).random((h, w))
    p, info = pad_to_even(x)
    assert p.shape[0] % 2 == 0 and p.shape[1] % 2 == 0
    assert p.shape[0] - h <= 1 and p.shape[1] - w <= 1
    np.testing.assert_array_equal(crop(p, info), x)


def test_verify_tiling_examples():
    assert verify_tiling(brick_4x4())
    diag = brick_4x4().pairs.copy()
    diag[0] = (0, 0, 1, 1)
    assert not verify_tiling(Tiling(diag, 4, 4))
    dup = brick_4x4().pairs.copy()
    dup[1] = dup[0]
    assert not verify_tiling(Tiling(dup, 4, 4))
    assert not verify_tiling(Tiling(brick_4x4().pairs[:-1], 4, 4))


def test_render_constant_and_kept_pixels(rng):
    t = brick_4x4()
    np.testing.assert_array_equal(render_tiling(np.full((4, 4), 0.7), t, "even"), 0.7)
    x = rng.random((4, 4))
    for keep in Parity:
        out = render_tiling(x, t, keep)
        kept = keep.mask(4, 4)
        np.testing.assert_array_equal(out[kept], x[kept])
    with pytest.raises(ValueError):
        render_tiling(x, Tiling(brick_4x4().pairs[:-1], 4, 4), "even")


def _check_render(x, t, keep, out):
    """Kept pixels unchanged, every gap copies its partner, each source used once."""
    keep = Parity.coerce(keep)
    padded, _ = pad_to_even(x)
    h, w = x.shape
    partner = t.partner_map()
    sources = []
    for i in range(h):
        for j in range(w):
            if (i + j) % 2 == keep.value:
                assert out[i, j] == x[i, j]
            else:
                k, l = partner[i, j]
                assert abs(k - i) + abs(l - j) == 1
                assert out[i, j] == padded[k, l]
                sources.append((k, l))
    assert len(sources) == len(set(sources))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_pixel_domino_pair_invariants(h, w, seed):
    x = np.random.default_rng(seed).random((h, w))
    even, odd, t_even, t_odd = pixel_domino_pair(x, return_tilings=True)
    assert even.shape == x.shape and odd.shape == x.shape
    assert verify_tiling(t_even) and verify_tiling(t_odd)
    _check_render(x, t_even, Parity.EVEN, even)
    _check_render(x, t_odd, Parity.ODD, odd)


def test_pair_multiset_each_even_pixel_twice(rng):
    x = rng.random((6, 8))
    even, odd = pixel_domino_pair(x)
    kept = x[Parity.EVEN.mask(6, 8)]
    np.testing.assert_array_equal(np.sort(even.ravel()), np.sort(np.concatenate([kept, kept])))
    kept = x[Parity.ODD.mask(6, 8)]
    np.testing.assert_array_equal(np.sort(odd.ravel()), np.sort(np.concatenate([kept, kept])))


def test_pair_constant_image():
    even, odd = pixel_domino_pair(np.full((5, 7), 0.25))
    assert np.all(even == 0.25) and np.all(odd == 0.25)


def test_vertical_stripes_give_vertical_dominoes():
    x = np.tile([0.0, 1.0], (4, 2))
    for parity in Parity:
        t = domino_tiling(x, parity)
        assert np.all(t.pairs[:, 1] == t.pairs[:, 3])
        assert np.all(np.abs(t.pairs[:, 0] - t.pairs[:, 2]) == 1)


def test_tiling_csv():
    t = Tiling(np.array([[0, 0, 0, 1], [1, 0, 1, 1]]), 2, 2)
    assert t.to_csv() == "0,0,0,1\n1,0,1,1\n"
