import numpy as np
import pytest

from advmask.errors import PNMFormatError
from advmask.image import (
    Image,
    l0_count,
    l2_distance,
    linf_distance,
    load_image,
    save_image,
    to_grayscale,
)


def test_image_invariants():
    img = Image.from_array(np.full((2, 3), 0.5))
    assert (img.width, img.height, img.channels) == (3, 2, 1)
    with pytest.raises(ValueError):
        Image.from_array(np.full((2, 2), 1.5))
    with pytest.raises(ValueError):
        Image.from_array(np.full((2, 2), -0.1))
    with pytest.raises(ValueError):
        Image(np.zeros((2, 2, 4)))


def test_image_is_immutable():
    img = Image.from_array(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1.0


def test_grayscale_constant_channels():
    img = Image(np.full((1, 1, 3), 0.3))
    assert to_grayscale(img).data[0, 0] == pytest.approx(0.3)


def test_grayscale_mean_is_forced():
    img = Image(np.array([[[0.0, 0.5, 1.0]]]))
    assert to_grayscale(img).data[0, 0] == pytest.approx(0.5)


def test_grayscale_identity_on_single_channel():
    data = np.random.default_rng(0).uniform(0, 1, (2, 2, 1))
    img = Image(data)
    assert np.array_equal(to_grayscale(img).data, data[:, :, 0])


def test_grayscale_within_channel_range(rng):
    img = Image(rng.uniform(0, 1, (5, 4, 3)))
    g = to_grayscale(img)
    assert (g.data >= img.data.min(axis=2) - 1e-15).all()
    assert (g.data <= img.data.max(axis=2) + 1e-15).all()


def test_grayscale_luminance_weights():
    img = Image(np.array([[[1.0, 0.0, 0.0]]]))
    g = to_grayscale(img, weights=(0.299, 0.587, 0.114))
    assert g.data[0, 0] == pytest.approx(0.299)


# -- file I/O ---------------------------------------------------------------


def test_pgm_byte_values(tmp_path):
    path = tmp_path / "x.pgm"
    path.write_bytes(b"P5 3 1 255\n" + bytes([255, 0, 128]))
    img = load_image(path)
    assert img.channels == 1
    assert img.data[0, 0, 0] == 1.0
    assert img.data[0, 1, 0] == 0.0
    assert img.data[0, 2, 0] == pytest.approx(128 / 255)


def test_ppm_with_comments(tmp_path):
    path = tmp_path / "x.ppm"
    path.write_bytes(b"P6\n# a comment\n1 1\n# another\n255\n" + bytes([10, 20, 30]))
    img = load_image(path)
    assert img.channels == 3
    assert np.allclose(img.data[0, 0], np.array([10, 20, 30]) / 255)


def test_round_trip_quantized(tmp_path, rng):
    data = rng.integers(0, 256, (7, 5, 3)).astype(np.float64) / 255.0
    img = Image(data)
    path = tmp_path / "rt.ppm"
    save_image(img, path)
    again = load_image(path)
    assert np.array_equal(again.data, img.data)
    # idempotent: a second round trip is bit-identical
    save_image(again, path)
    assert np.array_equal(load_image(path).data, again.data)


def test_save_rounds_ties_up(tmp_path):
    # 0.5/255 * 255 = 0.5 exactly: ties round up to byte 1
    img = Image.from_array(np.array([[0.5 / 255]]))
    path = tmp_path / "tie.pgm"
    save_image(img, path)
    assert load_image(path).data[0, 0, 0] == pytest.approx(1 / 255)


@pytest.mark.parametrize("buf,fragment", [
    (b"P7 1 1 255\n\x00", "magic"),
    (b"P5 a 1 255\n\x00", "width"),
    (b"P5 1 1 65535\n\x00\x00", "maxval"),
    (b"P5 2 2 255\n\x00\x00", "truncated raster"),
    (b"P5 2 2", "maxval"),
])
def test_parse_errors_name_offset(tmp_path, buf, fragment):
    path = tmp_path / "bad.pgm"
    path.write_bytes(buf)
    with pytest.raises(PNMFormatError) as err:
        load_image(path)
    assert fragment in str(err.value)
    assert "byte offset" in str(err.value)


def test_png_round_trip(tmp_path, rng):
    data = rng.integers(0, 256, (6, 4, 3)).astype(np.float64) / 255.0
    img = Image(data)
    p_png = tmp_path / "x.png"
    p_ppm = tmp_path / "x.ppm"
    save_image(img, p_png)
    save_image(img, p_ppm)
    # optional PNG path decodes to identical values
    assert np.array_equal(load_image(p_png).data, load_image(p_ppm).data)


# -- distances ----------------------------------------------------------------


def _pair(a, b):
    return Image.from_array(np.array(a)), Image.from_array(np.array(b))


def test_distances_zero_for_identical():
    a, b = _pair([[0.1, 0.2], [0.3, 0.4]], [[0.1, 0.2], [0.3, 0.4]])
    assert (linf_distance(a, b), l2_distance(a, b), l0_count(a, b)) == (0.0, 0.0, 0)


def test_distances_single_pixel():
    a, b = _pair([[0.5, 0.5], [0.5, 0.5]], [[0.7, 0.5], [0.5, 0.5]])
    assert linf_distance(a, b) == pytest.approx(0.2)
    assert l2_distance(a, b) == pytest.approx(0.2)
    assert l0_count(a, b) == 1


def test_distances_two_pixels():
    a, b = _pair([[0.5, 0.5], [0.5, 0.5]], [[0.8, 0.5], [0.1, 0.5]])
    assert linf_distance(a, b) == pytest.approx(0.4)
    assert l2_distance(a, b) == pytest.approx(0.5)  # sqrt(0.09 + 0.16)
    assert l0_count(a, b) == 2


def test_distances_positive_iff_distinguishable(rng):
    base = rng.uniform(0.2, 0.8, (4, 4, 1))
    bumped = base.copy()
    bumped[2, 1, 0] += 5e-13  # below the l0 tolerance
    a, b = Image(base), Image(bumped)
    assert l0_count(a, b) == 0
    bumped2 = base.copy()
    bumped2[2, 1, 0] += 1e-6
    c = Image(bumped2)
    assert l0_count(a, c) == 1
    assert linf_distance(a, c) > 0
    assert l2_distance(a, c) > 0


def test_distance_shape_mismatch():
    a = Image.from_array(np.zeros((2, 2)))
    b = Image.from_array(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        linf_distance(a, b)
