import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

import oracles
from hazeforge import imgcore

fields = arrays(
    np.float64,
    st.tuples(st.integers(1, 12), st.integers(1, 12)),
    elements=st.floats(0, 1, allow_nan=False),
)
odd_patches = st.integers(0, 4).map(lambda k: 2 * k + 1)


def test_load_scales_8bit(tmp_path):
    p = tmp_path / "px.png"
    Image.fromarray(np.array([[[255, 0, 128]]], dtype=np.uint8)).save(p)
    img = imgcore.load_image(p)
    assert img.dtype == np.float32
    np.testing.assert_array_equal(img[0, 0], np.float32([1.0, 0.0, 128 / 255]))


def test_load_grayscale_replicates(tmp_path):
    p = tmp_path / "gray.png"
    Image.fromarray(np.zeros((1, 1), dtype=np.uint8)).save(p)
    np.testing.assert_array_equal(imgcore.load_image(p), np.zeros((1, 1, 3)))

    Image.fromarray(np.array([[10, 200]], dtype=np.uint8)).save(p)
    img = imgcore.load_image(p)
    assert img.shape == (1, 2, 3)
    np.testing.assert_array_equal(img[0, 1], np.float32([200 / 255] * 3))


def test_load_drops_alpha(tmp_path):
    rgba = np.array(
        [[[10, 20, 30, 0], [40, 50, 60, 255]], [[70, 80, 90, 128], [255, 0, 1, 7]]],
        dtype=np.uint8,
    )
    p = tmp_path / "rgba.png"
    Image.fromarray(rgba).save(p)
    img = imgcore.load_image(p)
    expected = rgba[..., :3].astype(np.float32) / np.float32(255)
    np.testing.assert_array_equal(img, expected)
    # round trip through the RGB writer reproduces the colour bytes exactly
    out = tmp_path / "rgb.png"
    imgcore.save_image(img, out)
    np.testing.assert_array_equal(np.asarray(Image.open(out)), rgba[..., :3])


def test_load_errors(tmp_path):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"not an image")
    with pytest.raises(OSError, match="bad.png"):
        imgcore.load_image(bad)
    with pytest.raises(OSError):
        imgcore.load_image(tmp_path / "missing.png")


def test_save_quantizes_and_clamps(tmp_path):
    p = tmp_path / "out.png"
    imgcore.save_image(np.array([[[1.0, 0.0, 0.5019608], [1.2, -0.3, 0.5]]]), p)
    data = np.asarray(Image.open(p))
    np.testing.assert_array_equal(data[0, 0], [255, 0, 128])
    # 0.5 * 255 = 127.5 rounds half away from zero
    np.testing.assert_array_equal(data[0, 1], [255, 0, 128])


def test_save_unwritable(tmp_path):
    with pytest.raises(OSError):
        imgcore.save_image(np.zeros((2, 2, 3)), tmp_path / "nodir" / "x.png")


def test_round_trip_bit_identical(tmp_path, rng):
    img = rng.integers(0, 256, (16, 16, 3)).astype(np.float32) / 255
    p = tmp_path / "a.png"
    imgcore.save_image(img, p)
    first = imgcore.load_image(p)
    imgcore.save_image(first, p)
    np.testing.assert_array_equal(imgcore.load_image(p), first)
    np.testing.assert_array_equal(first, img)


def test_save_field_grayscale(tmp_path):
    p = tmp_path / "t.png"
    imgcore.save_field(np.array([[0.1, 1.0]]), p)
    im = Image.open(p)
    assert im.mode == "L"
    np.testing.assert_array_equal(np.asarray(im), [[26, 255]])


def test_as_image_validation():
    with pytest.raises(ValueError):
        imgcore.as_image(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        imgcore.as_image(np.zeros((0, 4, 3)))
    with pytest.raises(ValueError):
        imgcore.as_image(np.full((2, 2, 3), np.nan))


@pytest.mark.parametrize("patch", [2, 0, -1, 4])
def test_min_filter_rejects_even_patch(patch):
    with pytest.raises(ValueError):
        imgcore.min_filter(np.zeros((3, 3)), patch)


def test_min_filter_constant_and_identity(rng):
    np.testing.assert_array_equal(imgcore.min_filter(np.full((5, 7), 0.3), 5), 0.3)
    f = rng.random((6, 6))
    np.testing.assert_array_equal(imgcore.min_filter(f, 1), f)


def test_min_filter_matches_brute_force(rng):
    f = rng.random((9, 9))
    np.testing.assert_array_equal(imgcore.min_filter(f, 3), oracles.min_filter(f, 3))


@given(fields, odd_patches)
def test_min_filter_brute_force_property(field, patch):
    np.testing.assert_array_equal(
        imgcore.min_filter(field, patch), oracles.min_filter(field, patch)
    )


@given(fields, odd_patches, st.floats(0, 0.5))
def test_min_filter_monotone_and_below_input(field, patch, bump):
    lo = imgcore.min_filter(field, patch)
    hi = imgcore.min_filter(field + bump, patch)
    assert np.all(lo <= hi)
    assert np.all(lo <= field)


def test_channel_min(rng):
    np.testing.assert_allclose(imgcore.channel_min(np.array([[[0.9, 0.2, 0.5]]])), [[0.2]])
    np.testing.assert_array_equal(imgcore.channel_min(np.ones((3, 3, 3))), 1.0)
    img = rng.random((7, 5, 3))
    cm = imgcore.channel_min(img)
    np.testing.assert_array_equal(cm, oracles.channel_min(img))
    assert np.all(cm[..., None] <= img)


@settings(max_examples=30)
@given(fields, st.integers(0, 6))
def test_box_mean_matches_brute_force(field, radius):
    np.testing.assert_allclose(
        imgcore.box_mean(field, radius), oracles.box_mean(field, radius), atol=1e-12
    )
