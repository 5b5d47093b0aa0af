"""RNG, resize, and SIV1 container tests."""

import numpy as np
import numpy.testing as npt
import pytest

from segvid.grid import (FLOAT, Rng, as_f32, gaussian_fill, init_noise_blocks,
                         read_siv1, require_finite, resize_spatial, write_siv1)

import oracles


def test_rng_determinism():
    a = gaussian_fill(Rng(7), (2, 2))
    b = gaussian_fill(Rng(7), (2, 2))
    assert np.array_equal(a, b)
    assert a.dtype == FLOAT


def test_rng_distinct_seeds():
    a = gaussian_fill(Rng(7), (2, 2))
    b = gaussian_fill(Rng(8), (2, 2))
    assert not np.array_equal(a, b)


def test_rng_moments():
    x = gaussian_fill(Rng(0), (1000, 1000))
    assert abs(float(x.mean())) < 0.01
    assert abs(float(x.var()) - 1.0) < 0.02


def test_rng_split_independent_of_parent_draws():
    r = Rng(5)
    child_before = r.split(3).normal((4,))
    r.normal((10,))  # consume from the parent
    child_after = Rng(5).split(3).normal((4,))
    assert np.array_equal(child_before, child_after)


def test_rng_split_paths_differ():
    a = Rng(5).split(1).normal((8,))
    b = Rng(5).split(2).normal((8,))
    c = Rng(5).split(1, 2).normal((8,))
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_rng_rejects_bad_seeds():
    with pytest.raises(ValueError):
        Rng(-1)
    with pytest.raises(ValueError):
        Rng(2**64)
    with pytest.raises(ValueError):
        Rng("7")


def test_init_noise_blocks_keyed_per_block():
    z = init_noise_blocks(Rng(3), 5, 2, 2, 3)
    assert np.array_equal(z[0], np.zeros((2, 2, 3), FLOAT))
    # block content depends only on (seed, block index), not on t
    z9 = init_noise_blocks(Rng(3), 9, 2, 2, 3)
    npt.assert_array_equal(z9[:5], z)


def test_resize_constant_invariance():
    v = np.full((3, 8, 8, 3), 0.5, FLOAT)
    npt.assert_array_equal(resize_spatial(v, "down_avg", 4), np.full((3, 2, 2, 3), 0.5, FLOAT))
    npt.assert_array_equal(resize_spatial(v, "up_nearest", 2), np.full((3, 16, 16, 3), 0.5, FLOAT))


def test_resize_block_mean():
    v = np.array([[0.0, 1.0], [1.0, 0.0]], FLOAT).reshape(1, 2, 2, 1)
    out = resize_spatial(v, "down_avg", 2)
    npt.assert_array_equal(out, np.full((1, 1, 1, 1), 0.5, FLOAT))


def test_down_then_up_matches_loop_oracle():
    rng = np.random.default_rng(0)
    v = rng.random((1, 8, 8, 3)).astype(FLOAT)
    got = resize_spatial(resize_spatial(v, "down_avg", 2), "up_nearest", 2)
    want = np.empty_like(v, dtype=np.float64)
    for y in range(0, 8, 2):
        for x in range(0, 8, 2):
            for c in range(3):
                want[0, y:y + 2, x:x + 2, c] = v[0, y:y + 2, x:x + 2, c].mean(dtype=np.float64)
    npt.assert_allclose(got, want, atol=1e-6)
    # a second cycle with the same factor is idempotent
    again = resize_spatial(resize_spatial(got, "down_avg", 2), "up_nearest", 2)
    npt.assert_array_equal(again, got)


def test_resize_factor_one_is_copy():
    v = np.zeros((2, 4, 4, 3), FLOAT)
    out = resize_spatial(v, "down_avg", 1)
    assert np.array_equal(out, v) and out is not v


def test_resize_errors():
    v = np.zeros((1, 6, 6, 3), FLOAT)
    with pytest.raises(ValueError):
        resize_spatial(v, "down_avg", 4)
    with pytest.raises(ValueError):
        resize_spatial(v, "sideways", 2)
    with pytest.raises(ValueError):
        resize_spatial(v, "down_avg", 0)
    with pytest.raises(ValueError):
        resize_spatial(np.zeros((4, 4, 3), FLOAT), "down_avg", 2)


def test_siv1_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(1)
    arr = rng.standard_normal((3, 4, 5, 2)).astype(FLOAT)
    path = tmp_path / "t.siv1"
    write_siv1(path, arr)
    back = read_siv1(path)
    assert back.tobytes() == arr.tobytes()
    assert back.dtype == FLOAT and back.shape == arr.shape


def test_siv1_rejects_garbage(tmp_path):
    p = tmp_path / "bad.siv1"
    p.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(ValueError):
        read_siv1(p)
    p.write_bytes(b"SIV")
    with pytest.raises(ValueError):
        read_siv1(p)
    # correct header, short payload
    arr = np.zeros((1, 2, 2, 1), FLOAT)
    write_siv1(p, arr)
    p.write_bytes(p.read_bytes()[:-4])
    with pytest.raises(ValueError):
        read_siv1(p)


def test_siv1_rejects_nonzero_reserved(tmp_path):
    p = tmp_path / "r.siv1"
    write_siv1(p, np.zeros((1, 1, 1, 1), FLOAT))
    raw = bytearray(p.read_bytes())
    raw[20] = 1  # reserved word
    p.write_bytes(bytes(raw))
    with pytest.raises(ValueError):
        read_siv1(p)


def test_siv1_rejects_non4d_and_nonfinite(tmp_path):
    with pytest.raises(ValueError):
        write_siv1(tmp_path / "x.siv1", np.zeros((2, 2), FLOAT))
    bad = np.zeros((1, 1, 1, 1), FLOAT)
    bad[0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        write_siv1(tmp_path / "y.siv1", bad)


def test_as_f32_and_require_finite():
    out = as_f32([[1.0, 2.0]])
    assert out.dtype == FLOAT
    with pytest.raises(ValueError):
        as_f32([np.inf])
    with pytest.raises(ValueError):
        require_finite(np.array([np.nan]))


def test_canon_oracle_self_check():
    # the ring convention used by the motion tests
    assert oracles.canon(4, 16) == 4
    assert oracles.canon(-4, 16) == -4
    assert oracles.canon(12, 16) == -4
    assert oracles.canon(8, 16) == 8
