"""
8-bit grayscale images for TexSeek

Reads Netpbm P2/P3/P5/P6 (color is reduced to BT.601 luma), writes binary P5,
and provides the lossless quarter-turn rotation and histogram used by the
stego fidelity checks and the rotation-invariance tests.
"""
import pathlib
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np

from src.errors import GeometryError, ImageFormatError

_WHITESPACE = b" \t\n\r\v\f"
_MAGICS = {b"P2": (1, False), b"P3": (3, False), b"P5": (1, True), b"P6": (3, True)}


@dataclass(frozen=True, eq=False)
class GrayImage:
    """P x Q raster of 8-bit intensities, stored as a (height, width) uint8 array"""
    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise GeometryError(f"image dimensions must be positive, got {self.width}x{self.height}")
        if self.pixels.shape != (self.height, self.width):
            raise GeometryError(
                f"pixel array shape {self.pixels.shape} does not match {self.width}x{self.height}"
            )

    @classmethod
    def from_array(cls, array) -> "GrayImage":
        """Build an image from any 2-D array-like, clipping and rounding into [0, 255]"""
        data = np.asarray(array)
        if data.ndim != 2:
            raise GeometryError(f"expected a 2-D array, got {data.ndim} dimensions")
        if data.dtype != np.uint8:
            data = np.clip(np.floor(data.astype(np.float64) + 0.5), 0, 255).astype(np.uint8)
        data = np.array(data, dtype=np.uint8, order="C", copy=True)
        data.setflags(write=False)
        return cls(width=data.shape[1], height=data.shape[0], pixels=data)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))

    __hash__ = None


class _Cursor:
    """Tokenizer over a Netpbm header"""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def skip_space(self):
        while self.pos < len(self.data):
            byte = self.data[self.pos:self.pos + 1]
            if byte == b"#":
                end = self.data.find(b"\n", self.pos)
                self.pos = len(self.data) if end < 0 else end + 1
            elif byte in _WHITESPACE:
                self.pos += 1
            else:
                break

    def integer(self, what: str) -> int:
        self.skip_space()
        start = self.pos
        while self.pos < len(self.data) and self.data[self.pos:self.pos + 1].isdigit():
            self.pos += 1
        if start == self.pos:
            raise ImageFormatError(f"expected {what}", start)
        return int(self.data[start:self.pos])


def _rescale(samples: np.ndarray, maxval: int) -> np.ndarray:
    if maxval == 255:
        return samples.astype(np.int64)
    wide = samples.astype(np.int64)
    return (wide * 510 + maxval) // (2 * maxval)


def _luma(rgb: np.ndarray) -> np.ndarray:
    # Y = round(0.299 R + 0.587 G + 0.114 B), half up
    return (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2] + 500) // 1000


def read_pnm(data: bytes) -> GrayImage:
    """
    Parse a Netpbm image into a grayscale raster

    Args:
        data: File contents beginning with P2, P3, P5 or P6

    Returns:
        The decoded GrayImage; color input is reduced to luma, maxval rescaled to 255

    Raises:
        ImageFormatError: Malformed header, bad maxval or truncated raster
    """
    magic = data[:2]
    if magic not in _MAGICS:
        raise ImageFormatError("not a Netpbm grayscale or color image", 0)
    channels, binary = _MAGICS[magic]

    cursor = _Cursor(data)
    cursor.pos = 2
    width = cursor.integer("width")
    height = cursor.integer("height")
    maxval_offset = cursor.pos
    maxval = cursor.integer("maxval")
    if width < 1 or height < 1:
        raise ImageFormatError(f"invalid dimensions {width}x{height}", maxval_offset)
    if maxval < 1 or maxval > 65535:
        raise ImageFormatError(f"maxval {maxval} outside 1..65535", maxval_offset)

    count = width * height * channels
    if binary:
        if cursor.pos >= len(data) or data[cursor.pos:cursor.pos + 1] not in _WHITESPACE:
            raise ImageFormatError("missing whitespace after maxval", cursor.pos)
        start = cursor.pos + 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        needed = count * dtype.itemsize
        if len(data) - start < needed:
            raise ImageFormatError(
                f"truncated raster: need {needed} bytes, have {len(data) - start}", len(data)
            )
        samples = np.frombuffer(data, dtype=dtype, count=count, offset=start)
    else:
        values: List[int] = []
        for _ in range(count):
            cursor.skip_space()
            if cursor.pos >= len(data):
                raise ImageFormatError("truncated raster", cursor.pos)
            values.append(cursor.integer("sample"))
        samples = np.array(values, dtype=np.int64)

    if samples.size and int(samples.max()) > maxval:
        raise ImageFormatError(f"sample exceeds maxval {maxval}", maxval_offset)

    scaled = _rescale(samples, maxval)
    if channels == 3:
        gray = _luma(scaled.reshape(height, width, 3))
    else:
        gray = scaled.reshape(height, width)
    return GrayImage.from_array(gray.astype(np.uint8))


def write_pgm(img: GrayImage) -> bytes:
    """
    Serialize an image as binary P5 with maxval 255

    Args:
        img: Image to write

    Returns:
        The P5 file contents
    """
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes(order="C")


def load_image(path: Union[str, pathlib.Path]) -> GrayImage:
    """Read a Netpbm file from disk"""
    return read_pnm(pathlib.Path(path).read_bytes())


def save_image(img: GrayImage, path: Union[str, pathlib.Path]) -> None:
    """Write an image to disk as binary P5"""
    pathlib.Path(path).write_bytes(write_pgm(img))


def rotate_quarter(img: GrayImage, quarter_turns: int) -> GrayImage:
    """
    Rotate an image counterclockwise by 90 degrees per quarter turn

    Args:
        img: Image to rotate
        quarter_turns: Number of quarter turns, 0..3

    Returns:
        The rotated image; width and height swap for odd turns
    """
    if quarter_turns not in (0, 1, 2, 3):
        raise GeometryError(f"quarter_turns must be 0..3, got {quarter_turns}")
    return GrayImage.from_array(np.rot90(img.pixels, k=quarter_turns))


def histogram(img: GrayImage) -> np.ndarray:
    """
    Count pixels per gray level

    Args:
        img: Image to count

    Returns:
        256 integer counts summing to width x height
    """
    return np.bincount(img.pixels.ravel(), minlength=256).astype(np.int64)


def histogram_delta(a: GrayImage, b: GrayImage) -> int:
    """Total absolute bin difference between two histograms"""
    return int(np.abs(histogram(a) - histogram(b)).sum())


def histogram_tsv(cover: GrayImage, stego: GrayImage) -> str:
    """Render cover and stego histograms as value<TAB>cover<TAB>stego rows"""
    left = histogram(cover)
    right = histogram(stego)
    rows = ["value\tcover\tstego"]
    rows.extend(f"{value}\t{left[value]}\t{right[value]}" for value in range(256))
    return "\n".join(rows) + "\n"
