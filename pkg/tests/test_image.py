"""
Tests for Netpbm I/O, rotation and histograms
"""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from src.errors import GeometryError, ImageFormatError
from src.imaging.image import (
    GrayImage,
    histogram,
    histogram_delta,
    histogram_tsv,
    read_pnm,
    rotate_quarter,
    write_pgm,
)

images = arrays(
    np.uint8,
    st.tuples(st.integers(1, 12), st.integers(1, 12)),
).map(GrayImage.from_array)


def test_read_binary_gray():
    img = read_pnm(b"P5 2 1 255\n" + bytes([0, 255]))
    assert (img.width, img.height) == (2, 1)
    assert img.pixels.tolist() == [[0, 255]]


@pytest.mark.parametrize("rgb, luma", [
    ((255, 255, 255), 255),
    ((255, 0, 0), 76),
    ((0, 255, 0), 150),
    ((0, 0, 255), 29),
])
def test_read_binary_color_to_luma(rgb, luma):
    img = read_pnm(b"P6 1 1 255\n" + bytes(rgb))
    assert img.pixels.tolist() == [[luma]]


def test_read_ascii_with_comments():
    data = b"P2\n# made by hand\n3 2\n# max\n9\n0 9 3\n  9 0\n1\n"
    img = read_pnm(data)
    # 9 -> 255, 3 -> round(85) = 85, 1 -> round(28.33) = 28
    assert img.pixels.tolist() == [[0, 255, 85], [255, 0, 28]]


def test_read_ascii_color():
    img = read_pnm(b"P3 2 1 255 255 0 0 0 0 255")
    assert img.pixels.tolist() == [[76, 29]]


def test_read_sixteen_bit_samples():
    img = read_pnm(b"P5 2 1 65535\n" + bytes([0xFF, 0xFF, 0x00, 0x00]))
    assert img.pixels.tolist() == [[255, 0]]


def test_read_maxval_one():
    img = read_pnm(b"P2 2 1 1\n1 0\n")
    assert img.pixels.tolist() == [[255, 0]]


@pytest.mark.parametrize("data", [
    b"P5 1 1 0\n\x00",
    b"P5 1 1 70000\n\x00\x00",
    b"P5 2 2 255\n\x00\x01",
    b"P4 1 1\n\x00",
    b"P5 x 1 255\n\x00",
    b"P2 2 1 255\n7",
    b"P2 1 1 5\n9",
])
def test_read_rejects_malformed(data):
    with pytest.raises(ImageFormatError, match="byte offset"):
        read_pnm(data)


def test_truncated_raster_names_offset():
    with pytest.raises(ImageFormatError) as excinfo:
        read_pnm(b"P5 2 2 255\n\x00\x01")
    assert excinfo.value.offset == 13


def test_write_smallest_image():
    img = GrayImage.from_array([[0]])
    assert write_pgm(img) == b"P5\n1 1\n255\n\x00"


def test_write_row_major_order():
    img = GrayImage.from_array(np.array([[1, 2], [3, 4]], dtype=np.uint8))
    assert write_pgm(img).endswith(bytes([1, 2, 3, 4]))


def test_round_trip_random(random_image):
    assert read_pnm(write_pgm(random_image)) == random_image


@given(images)
@settings(max_examples=50)
def test_round_trip_property(img):
    assert read_pnm(write_pgm(img)) == img


def test_from_array_clips_and_rounds():
    img = GrayImage.from_array(np.array([[-4.0, 12.5, 300.0]]))
    assert img.pixels.tolist() == [[0, 13, 255]]


def test_from_array_does_not_freeze_caller_array():
    source = np.zeros((2, 2), dtype=np.uint8)
    GrayImage.from_array(source)
    source[0, 0] = 9


def test_pixels_are_read_only(random_image):
    with pytest.raises(ValueError):
        random_image.pixels[0, 0] = 1


def test_invalid_geometry():
    with pytest.raises(GeometryError):
        GrayImage(width=2, height=2, pixels=np.zeros((3, 2), dtype=np.uint8))
    with pytest.raises(GeometryError):
        GrayImage.from_array(np.zeros((0, 3)))


def test_rotate_identity(random_image):
    assert rotate_quarter(random_image, 0) == random_image


def test_rotate_single_pixel():
    img = GrayImage.from_array([[42]])
    for turns in range(4):
        assert rotate_quarter(img, turns) == img


def test_rotate_counterclockwise():
    img = GrayImage.from_array(np.array([[10, 20]], dtype=np.uint8))
    rotated = rotate_quarter(img, 1)
    assert (rotated.width, rotated.height) == (1, 2)
    assert rotated.pixels.ravel().tolist() == [20, 10]


def test_rotate_swaps_dimensions():
    img = GrayImage.from_array(np.zeros((3, 5), dtype=np.uint8))
    assert rotate_quarter(img, 1).shape == (5, 3)
    assert rotate_quarter(img, 2).shape == (3, 5)


@given(images)
@settings(max_examples=50)
def test_four_quarter_turns_are_identity(img):
    rotated = img
    for _ in range(4):
        rotated = rotate_quarter(rotated, 1)
    assert rotated == img


@pytest.mark.parametrize("turns", [-1, 4, 7])
def test_rotate_rejects_bad_turns(random_image, turns):
    with pytest.raises(GeometryError):
        rotate_quarter(random_image, turns)


def test_histogram_single_bin():
    counts = histogram(GrayImage.from_array(np.full((4, 4), 7, dtype=np.uint8)))
    assert counts[7] == 16
    assert counts.sum() == 16
    assert len(counts) == 256


def test_histogram_extremes():
    counts = histogram(GrayImage.from_array(np.array([[0, 255]], dtype=np.uint8)))
    assert counts[0] == 1 and counts[255] == 1
    assert counts.sum() == 2


@given(images)
@settings(max_examples=50)
def test_histogram_counts_every_pixel(img):
    assert histogram(img).sum() == img.width * img.height


def test_histogram_delta():
    a = GrayImage.from_array(np.array([[0, 0, 5]], dtype=np.uint8))
    b = GrayImage.from_array(np.array([[0, 5, 5]], dtype=np.uint8))
    assert histogram_delta(a, a) == 0
    assert histogram_delta(a, b) == 2


def test_histogram_tsv(random_image):
    rows = histogram_tsv(random_image, random_image).splitlines()
    assert rows[0] == "value\tcover\tstego"
    assert len(rows) == 257
    value, cover, stego = rows[1].split("\t")
    assert value == "0" and cover == stego
