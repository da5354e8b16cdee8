"""
DCT parity steganography

Each 8x8 block carries one bit: every nonzero quantized coefficient in the
parity set is pushed to odd parity for a 1 and even parity for a 0, and the
extractor takes the majority parity. The payload hidden this way is a framed,
CRC-protected copy of the image's feature vector and attributes.
"""
import logging
import math
import struct
import zlib
from dataclasses import dataclass, field
from typing import Dict, Optional
from urllib.parse import unquote

import numpy as np

from src.errors import (
    CapacityError,
    CorruptPayloadError,
    GeometryError,
    NoEmbeddedAttributesError,
    NotAPayloadError,
    ShortReadError,
    UnembeddableBlockError,
)
from src.imaging.dct import (
    ANNEX_K_LUMINANCE,
    BLOCK,
    BlockGrid,
    dequantize,
    forward_dct,
    inverse_dct,
    partition,
    quantize,
    reassemble,
)
from src.imaging.gabor import FeatureVector
from src.imaging.image import GrayImage

logger = logging.getLogger(__name__)

MAGIC = b"TSG1"
VERSION = 1
MAX_FRAME_BYTES = 65535
MAX_PASSES = 8
# Passes that re-force a block's own coefficients before it is flattened
REFORCE_PASSES = 4
CRC_BYTES = 4


@dataclass(frozen=True)
class StegoPayload:
    features: FeatureVector
    attributes: Dict[str, str] = field(default_factory=dict)


def header_bytes(feature_dims: int = 60) -> int:
    """Bytes before the attribute text: magic, version, orientation, features, attr_len"""
    return len(MAGIC) + 2 + 4 * feature_dims + 2


def _escape(text: str) -> str:
    return text.replace("%", "%25").replace(";", "%3B").replace("=", "%3D")


def encode_attributes(attributes: Dict[str, str]) -> bytes:
    """Join attributes as k=v pairs separated by ';', escaping the separators"""
    return ";".join(f"{_escape(key)}={_escape(value)}" for key, value in attributes.items()).encode("utf-8")


def decode_attributes(raw: bytes) -> Dict[str, str]:
    text = raw.decode("utf-8")
    attributes: Dict[str, str] = {}
    if not text:
        return attributes
    for item in text.split(";"):
        key, sep, value = item.partition("=")
        if not sep:
            raise CorruptPayloadError(f"attribute without '=': {item!r}")
        attributes[unquote(key)] = unquote(value)
    return attributes


def encode_payload(payload: StegoPayload) -> np.ndarray:
    """
    Frame a payload and expand it to bits

    Args:
        payload: Feature vector and attributes to hide

    Returns:
        uint8 array of 0/1 bits, MSB first per byte

    Raises:
        CapacityError: Frame longer than 65535 bytes
    """
    features = payload.features
    attr = encode_attributes(payload.attributes)
    body = (
        MAGIC
        + bytes([VERSION, features.dominant_orientation])
        + features.values.astype(">f4").tobytes()
    )
    frame_length = len(body) + 2 + len(attr) + CRC_BYTES
    if frame_length > MAX_FRAME_BYTES or len(attr) > 0xFFFF:
        raise CapacityError(f"payload frame of {frame_length} bytes exceeds {MAX_FRAME_BYTES}")
    body += struct.pack(">H", len(attr)) + attr
    frame = body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)
    return np.unpackbits(np.frombuffer(frame, dtype=np.uint8))


def _bits_to_bytes(bits) -> bytes:
    bits = np.asarray(bits, dtype=np.uint8)
    usable = (bits.size // 8) * 8
    return np.packbits(bits[:usable]).tobytes()


def decode_payload(bits, feature_dims: int = 60, orientations: int = 6) -> StegoPayload:
    """
    Parse and validate a bit string produced by encode_payload

    Args:
        bits: 0/1 bits, MSB first per byte
        feature_dims: Number of feature reals in the frame
        orientations: Orientation count of the bank the features came from

    Returns:
        The decoded StegoPayload

    Raises:
        NotAPayloadError: Bad magic or version
        CorruptPayloadError: CRC mismatch, undecodable content, or an
            attribute length pointing past the data
        ShortReadError: Bit string ends inside the fixed header
    """
    data = _bits_to_bytes(bits)
    if data[:len(MAGIC)] != MAGIC[:len(data)] or not data:
        raise NotAPayloadError()
    head = header_bytes(feature_dims)
    if len(data) < head:
        raise ShortReadError()

    (attr_len,) = struct.unpack(">H", data[head - 2:head])
    end = head + attr_len
    if len(data) < end + CRC_BYTES:
        raise CorruptPayloadError(
            f"corrupted payload (attribute length {attr_len} points past the {len(data)} bytes read)"
        )
    (crc,) = struct.unpack(">I", data[end:end + CRC_BYTES])
    if zlib.crc32(data[:end]) & 0xFFFFFFFF != crc:
        raise CorruptPayloadError()
    if data[len(MAGIC)] != VERSION:
        raise NotAPayloadError(f"not a stego payload (unsupported version {data[len(MAGIC)]})")

    dominant = data[len(MAGIC) + 1]
    values = np.frombuffer(data, dtype=">f4", count=feature_dims, offset=len(MAGIC) + 2).astype(np.float64)
    scales = feature_dims // (2 * orientations)
    if dominant >= orientations or 2 * scales * orientations != feature_dims:
        raise CorruptPayloadError(f"feature header inconsistent with a {orientations}-orientation bank")
    try:
        attributes = decode_attributes(data[head:end])
    except UnicodeDecodeError as exc:
        raise CorruptPayloadError(f"corrupted payload (attributes are not UTF-8: {exc})") from exc

    features = FeatureVector(values=values, dominant_orientation=dominant, scales=scales, orientations=orientations)
    return StegoPayload(features=features, attributes=attributes)


def capacity(img: GrayImage) -> int:
    """One bit per 8x8 block, padded blocks included"""
    return (-(-img.width // BLOCK)) * (-(-img.height // BLOCK))


def parity_mask(parity_dc: bool = False) -> np.ndarray:
    """Coefficients whose parity carries the bit; DC is excluded unless parity_dc"""
    mask = np.ones((BLOCK, BLOCK), dtype=bool)
    mask[0, 0] = parity_dc
    return mask


def force_parity(quantized, bits, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Push every nonzero masked coefficient to the parity of its block's bit

    Args:
        quantized: (n, 8, 8) quantized blocks
        bits: n target bits, 1 for odd and 0 for even
        mask: Parity set; defaults to all coefficients except DC

    Returns:
        The modified blocks; coefficients move away from zero, so no sign flips
        and no new zeros
    """
    mask = parity_mask() if mask is None else mask
    q = np.array(quantized, dtype=np.int64)
    target = np.asarray(bits, dtype=np.int64).reshape(-1, *([1] * (q.ndim - 1)))
    wrong = (q != 0) & mask & ((np.abs(q) % 2) != target)
    return q + np.sign(q) * wrong


def majority_bits(quantized, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Odd majority among nonzero masked coefficients gives 1; even majority, ties and empty blocks give 0"""
    mask = parity_mask() if mask is None else mask
    q = np.asarray(quantized, dtype=np.int64)
    if q.ndim == 2:
        q = q[np.newaxis]
    nonzero = (q != 0) & mask
    odd = (nonzero & (np.abs(q) % 2 == 1)).sum(axis=(1, 2))
    even = nonzero.sum(axis=(1, 2)) - odd
    return (odd > even).astype(np.uint8)


def _visible_extent(indices: np.ndarray, grid: BlockGrid):
    """Visible width and height of each block; edge blocks may be partly padding"""
    valid_w = np.minimum(BLOCK, grid.width - BLOCK * (indices % grid.blocks_x))
    valid_h = np.minimum(BLOCK, grid.height - BLOCK * (indices // grid.blocks_x))
    return valid_w, valid_h


def _replicate_edges(blocks: np.ndarray, indices: np.ndarray, grid: BlockGrid) -> np.ndarray:
    """Re-pad partial edge blocks from their visible pixels, as partition() would"""
    valid_w, valid_h = _visible_extent(indices, grid)
    for row in np.flatnonzero((valid_w < BLOCK) | (valid_h < BLOCK)):
        w, h = int(valid_w[row]), int(valid_h[row])
        blocks[row, :, w:] = blocks[row, :, w - 1:w]
        blocks[row, h:, :] = blocks[row, h - 1:h, :]
    return blocks


def flat_carriers(quantized, bits, table, mask, full_width=None) -> np.ndarray:
    """
    Replace blocks by flat ones that still carry their bits

    Each block keeps its quantized DC, clamped so the block stays clear of
    0 and 255, and a 1 gets a single seeded AC coefficient. Nothing then
    clips, and pixel rounding moves no coefficient by as much as half a
    quantizer step, so the bit survives re-encoding.

    Args:
        quantized: (n, 8, 8) quantized blocks
        bits: n target bits
        table: Quantization table
        mask: Parity set
        full_width: Per block, whether its whole width is visible; the seed goes
            in (0, 1) for those and in (1, 0) otherwise so edge padding keeps it

    Returns:
        The (n, 8, 8) replacement blocks
    """
    q = np.asarray(quantized, dtype=np.int64)
    target = np.asarray(bits, dtype=np.int64)
    full_width = np.ones(len(q), dtype=bool) if full_width is None else np.asarray(full_width, dtype=bool)
    table = np.asarray(table, dtype=np.float64)
    seed_swing = max(table[0, 1], table[1, 0]) * math.sqrt(2) / BLOCK
    limit = max(0, int((127.0 - seed_swing) * BLOCK / table[0, 0]))

    dc = np.clip(q[:, 0, 0], -limit, limit)
    if mask[0, 0]:
        # toward zero, so the clamp still holds
        dc = dc - np.sign(dc) * ((np.abs(dc) % 2) != target)
    flat = np.zeros_like(q)
    flat[:, 0, 0] = dc
    ones = target == 1
    flat[ones & full_width, 0, 1] = 1
    flat[ones & ~full_width, 1, 0] = 1
    return flat


def _settle(grid: BlockGrid, count: int, bits: np.ndarray, table, mask) -> None:
    """Re-extract the carrying blocks and re-embed the ones whose bit did not survive"""
    pending = np.arange(count)
    for attempt in range(MAX_PASSES + 1):
        grid.blocks[pending] = _replicate_edges(grid.blocks[pending], pending, grid)
        q = quantize(forward_dct(grid.blocks[pending]), table)
        bad = majority_bits(q, mask) != bits[pending]
        if not bad.any():
            return
        pending = pending[bad]
        if attempt == MAX_PASSES:
            break
        logger.debug("pass %d: re-embedding %d blocks", attempt + 1, pending.size)

        target = bits[pending]
        if attempt < REFORCE_PASSES:
            q = force_parity(q[bad], target, mask)
            # Only verification passes may create a nonzero coefficient
            empty = ~((q != 0) & mask).any(axis=(1, 2)) & (target == 1)
            q[empty, 0, 1] = 1
        else:
            valid_w, _ = _visible_extent(pending, grid)
            q = flat_carriers(q[bad], target, table, mask, valid_w == BLOCK)
            logger.debug("flattened %d blocks", pending.size)
        grid.blocks[pending] = inverse_dct(dequantize(q, table))

    raise UnembeddableBlockError(int(pending[0]))


def embed(cover: GrayImage, bits, table=ANNEX_K_LUMINANCE, parity_dc: bool = False) -> GrayImage:
    """
    Hide one bit per block in the cover's quantized DCT coefficients

    Args:
        cover: Cover image
        bits: 0/1 bits, assigned to blocks in raster order from block 0
        table: Quantization table
        parity_dc: Include the DC coefficient in the parity set

    Returns:
        The stego image; every block is re-encoded through the quantizer

    Raises:
        CapacityError: More bits than blocks
        UnembeddableBlockError: A block's bit could not be made to survive
    """
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    available = capacity(cover)
    if bits.size > available:
        raise CapacityError(f"{bits.size} bits exceed the image capacity of {available} bits")

    mask = parity_mask(parity_dc)
    grid = partition(cover)
    q = quantize(forward_dct(grid.blocks), table)
    q[:bits.size] = force_parity(q[:bits.size], bits, mask)
    grid.blocks[:] = inverse_dct(dequantize(q, table))
    if bits.size:
        _settle(grid, bits.size, bits, table, mask)
    return reassemble(grid)


def extract(stego: GrayImage, bit_count: int, table=ANNEX_K_LUMINANCE, parity_dc: bool = False) -> np.ndarray:
    """
    Read back bit_count bits by majority coefficient parity

    Args:
        stego: Stego image
        bit_count: Number of leading blocks to read
        table: Quantization table
        parity_dc: Include the DC coefficient in the parity set

    Returns:
        uint8 array of 0/1 bits
    """
    available = capacity(stego)
    if bit_count > available:
        raise CapacityError(f"{bit_count} bits exceed the image capacity of {available} bits")
    grid = partition(stego)
    q = quantize(forward_dct(grid.blocks[:bit_count]), table)
    return majority_bits(q, parity_mask(parity_dc))[:bit_count]


def embed_payload(cover: GrayImage, payload: StegoPayload, table=ANNEX_K_LUMINANCE, parity_dc: bool = False) -> GrayImage:
    """Frame a payload and embed it, failing with CapacityError if it does not fit"""
    bits = encode_payload(payload)
    available = capacity(cover)
    if bits.size > available:
        raise CapacityError(f"payload of {bits.size} bits exceeds the image capacity of {available} bits")
    return embed(cover, bits, table, parity_dc)


def read_payload(
    stego: GrayImage,
    feature_dims: int = 60,
    orientations: int = 6,
    table=ANNEX_K_LUMINANCE,
    parity_dc: bool = False,
) -> StegoPayload:
    """
    Extract and decode an embedded payload without knowing its length

    Args:
        stego: Image that may carry a payload
        feature_dims: Number of feature reals in the frame
        orientations: Orientation count of the bank
        table: Quantization table
        parity_dc: Include the DC coefficient in the parity set

    Returns:
        The decoded payload

    Raises:
        NoEmbeddedAttributesError: No frame header found
        CorruptPayloadError: Header found but CRC or length is wrong
    """
    head = header_bytes(feature_dims)
    available = capacity(stego)
    if available < head * 8:
        raise NoEmbeddedAttributesError()

    data = _bits_to_bytes(extract(stego, head * 8, table, parity_dc))
    if data[:len(MAGIC)] != MAGIC:
        raise NoEmbeddedAttributesError()
    (attr_len,) = struct.unpack(">H", data[head - 2:head])
    total_bits = (head + attr_len + CRC_BYTES) * 8
    if total_bits > available:
        raise CorruptPayloadError(f"corrupted payload (frame of {total_bits} bits exceeds capacity {available})")

    return decode_payload(extract(stego, total_bits, table, parity_dc), feature_dims, orientations)


def mse(a: GrayImage, b: GrayImage) -> float:
    if a.shape != b.shape:
        raise GeometryError(f"image sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}")
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    return float(np.mean(diff * diff))


def psnr(a: GrayImage, b: GrayImage) -> float:
    """
    Peak signal-to-noise ratio in decibels

    Args:
        a: First image
        b: Second image of the same size

    Returns:
        10 log10(255^2 / MSE), or math.inf for identical images
    """
    error = mse(a, b)
    if error == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / error)


def baseline(cover: GrayImage, table=ANNEX_K_LUMINANCE) -> GrayImage:
    """The cover after one quantize/dequantize round trip with no parity change"""
    return embed(cover, np.zeros(0, dtype=np.uint8), table)
