"""
Attribute embedding tools for the TexSeek MCP server

Hide an image's texture features and free-form attributes in its DCT
coefficients, and read them back.
"""
import asyncio
import math

from src.config import load_settings
from src.errors import TexSeekError
from src.imaging.gabor import feature_vector, normalize_rotation
from src.imaging.image import load_image, save_image
from src.imaging.stego import StegoPayload, baseline, capacity, embed_payload, encode_payload, psnr, read_payload
from src.retrieval.index import parse_attributes


def format_db(value: float) -> str:
    """Format a PSNR, spelling out identical images"""
    return "identical (inf)" if math.isinf(value) else f"{value:.2f} dB"


async def embed_image_attributes(cover_path: str, out_path: str, attributes: str = "") -> str:
    """
    Embed a cover image's features and attributes into a stego copy

    Args:
        cover_path: Cover image (PGM/PPM)
        out_path: Where to write the stego PGM
        attributes: Extra attributes as key=value;key=value (e.g. "title=granite;site=quarry")

    Returns:
        Payload size and fidelity of the stego image
    """
    try:
        extra = parse_attributes(attributes or "")
    except TexSeekError as e:
        return f"Error: {e}"

    def work():
        settings = load_settings()
        cover = load_image(cover_path)
        fields = {"size": f"{cover.width}x{cover.height}", **extra}
        features = normalize_rotation(feature_vector(cover, settings.bank)).as_float32()
        payload = StegoPayload(features=features, attributes=fields)
        stego = embed_payload(cover, payload, settings.quant_table, settings.parity_dc)
        save_image(stego, out_path)
        reference = baseline(cover, settings.quant_table)
        return cover, encode_payload(payload).size, psnr(reference, stego), psnr(cover, stego)

    try:
        cover, bits, vs_baseline, vs_cover = await asyncio.to_thread(work)
    except (TexSeekError, OSError) as e:
        return f"Error embedding attributes into {cover_path}: {e}"

    return "\n".join([
        f"# Stego Image {out_path}",
        f"**Payload**: {bits} bits of {capacity(cover)} available",
        f"**PSNR vs. re-encoded cover**: {format_db(vs_baseline)}",
        f"**PSNR vs. original cover**: {format_db(vs_cover)}",
    ])


async def extract_image_attributes(stego_path: str) -> str:
    """
    Read the features and attributes embedded in a stego image

    Args:
        stego_path: Stego image written by embed_image_attributes or build_image_index

    Returns:
        Embedded attributes and a summary of the embedded features
    """
    def work():
        settings = load_settings()
        return read_payload(
            load_image(stego_path),
            feature_dims=settings.bank.dimensions,
            orientations=settings.bank.orientations,
            table=settings.quant_table,
            parity_dc=settings.parity_dc,
        )

    try:
        payload = await asyncio.to_thread(work)
    except (TexSeekError, OSError) as e:
        return f"Error reading {stego_path}: {e}"

    features = payload.features
    lines = [f"# Embedded Attributes of {stego_path}", ""]
    if payload.attributes:
        lines.append("| Attribute | Value |")
        lines.append("|-----------|-------|")
        lines.extend(f"| {key} | {value} |" for key, value in payload.attributes.items())
    else:
        lines.append("No attributes")
    lines.extend([
        "",
        "## Texture Features",
        f"**Layout**: {features.scales} scales x {features.orientations} orientations",
        f"**Dominant orientation**: {features.dominant_orientation}",
        f"**Mean energy range**: {features.means.min():.4g} to {features.means.max():.4g}",
    ])
    return "\n".join(lines)
