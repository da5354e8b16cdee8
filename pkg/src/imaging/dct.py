"""
8x8 block DCT codec

Block partitioning with edge replication, orthonormal 2-D DCT-II with JPEG
level shift, and quantization against a standard table. Every operation
accepts a single (8, 8) block or a stack shaped (n, 8, 8).
"""
from dataclasses import dataclass

import numpy as np
from scipy import fft

from src.errors import GeometryError
from src.imaging.image import GrayImage

BLOCK = 8

# ISO/IEC 10918-1 Annex K luminance table
ANNEX_K_LUMINANCE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.int64)
ANNEX_K_LUMINANCE.setflags(write=False)


@dataclass(frozen=True, eq=False)
class BlockGrid:
    """Raster-ordered 8x8 blocks covering an image padded to multiples of 8"""
    blocks: np.ndarray
    blocks_x: int
    blocks_y: int
    width: int
    height: int

    @property
    def count(self) -> int:
        return self.blocks_x * self.blocks_y


def round_half_away(values) -> np.ndarray:
    """Round to the nearest integer, halves away from zero"""
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def block_counts(width: int, height: int):
    """Number of blocks along x and y for an image of the given size"""
    return -(-width // BLOCK), -(-height // BLOCK)


def partition(img: GrayImage) -> BlockGrid:
    """
    Split an image into 8x8 blocks in row-major order

    Args:
        img: Image to split; padded to multiples of 8 by edge replication

    Returns:
        The BlockGrid with blocks shaped (blocks_x * blocks_y, 8, 8)
    """
    blocks_x, blocks_y = block_counts(img.width, img.height)
    padded = np.pad(
        img.pixels,
        ((0, blocks_y * BLOCK - img.height), (0, blocks_x * BLOCK - img.width)),
        mode="edge",
    )
    blocks = (
        padded.reshape(blocks_y, BLOCK, blocks_x, BLOCK)
        .transpose(0, 2, 1, 3)
        .reshape(blocks_y * blocks_x, BLOCK, BLOCK)
        .copy()
    )
    return BlockGrid(blocks=blocks, blocks_x=blocks_x, blocks_y=blocks_y, width=img.width, height=img.height)


def reassemble(grid: BlockGrid) -> GrayImage:
    """
    Stitch blocks back into an image and crop the padding

    Args:
        grid: BlockGrid whose geometry matches its blocks

    Returns:
        The cropped image

    Raises:
        GeometryError: Block count or dimensions are inconsistent
    """
    blocks = np.asarray(grid.blocks)
    if grid.width < 1 or grid.height < 1 or (grid.blocks_x, grid.blocks_y) != block_counts(grid.width, grid.height):
        raise GeometryError(
            f"grid of {grid.blocks_x}x{grid.blocks_y} blocks cannot cover a {grid.width}x{grid.height} image"
        )
    if blocks.shape != (grid.count, BLOCK, BLOCK):
        raise GeometryError(f"expected {grid.count} blocks of 8x8, got array of shape {blocks.shape}")

    full = (
        blocks.reshape(grid.blocks_y, grid.blocks_x, BLOCK, BLOCK)
        .transpose(0, 2, 1, 3)
        .reshape(grid.blocks_y * BLOCK, grid.blocks_x * BLOCK)
    )
    return GrayImage.from_array(full[:grid.height, :grid.width].astype(np.uint8))


def forward_dct(block) -> np.ndarray:
    """
    Level-shift by -128 and apply the orthonormal 2-D DCT-II

    Args:
        block: (8, 8) or (n, 8, 8) pixel values

    Returns:
        DCT coefficients with the DC term at [..., 0, 0]
    """
    shifted = np.asarray(block, dtype=np.float64) - 128.0
    return fft.dctn(shifted, type=2, norm="ortho", axes=(-2, -1))


def inverse_dct(coeffs) -> np.ndarray:
    """
    Inverse orthonormal DCT, undo the level shift, round and clamp

    Args:
        coeffs: (8, 8) or (n, 8, 8) DCT coefficients

    Returns:
        uint8 pixel block(s)
    """
    spatial = fft.idctn(np.asarray(coeffs, dtype=np.float64), type=2, norm="ortho", axes=(-2, -1)) + 128.0
    return np.clip(round_half_away(spatial), 0, 255).astype(np.uint8)


def quantize(coeffs, table=ANNEX_K_LUMINANCE) -> np.ndarray:
    """Divide by the quantization table and round half away from zero"""
    return round_half_away(np.asarray(coeffs, dtype=np.float64) / table).astype(np.int64)


def dequantize(quantized, table=ANNEX_K_LUMINANCE) -> np.ndarray:
    """Multiply quantized coefficients back by the table"""
    return np.asarray(quantized, dtype=np.float64) * table
