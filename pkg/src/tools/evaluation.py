"""
Fidelity evaluation tools for the TexSeek MCP server
"""
import asyncio

from src.config import load_settings
from src.errors import TexSeekError
from src.imaging.image import load_image
from src.retrieval.evaluation import psnr_sweep
from src.tools.stego import format_db


async def payload_fidelity_sweep(cover_path: str, sizes: str = "1000,2000,5000,10000", seed: int = 42) -> str:
    """
    Measure how image fidelity degrades as more payload bits are embedded

    Args:
        cover_path: Cover image (PGM/PPM)
        sizes: Comma-separated payload sizes in bits
        seed: Seed for the random payload bits

    Returns:
        Table of PSNR per payload size
    """
    try:
        payload_sizes = [int(size) for size in sizes.split(",") if size.strip()]
    except ValueError:
        return f"Error: sizes must be comma-separated integers, got '{sizes}'"
    if not payload_sizes:
        return "Error: at least one payload size is required"

    def work():
        return psnr_sweep(load_image(cover_path), payload_sizes, seed, load_settings())

    try:
        rows = await asyncio.to_thread(work)
    except (TexSeekError, OSError) as e:
        return f"Error running sweep on {cover_path}: {e}"

    lines = [
        f"# Payload vs. PSNR for {cover_path}",
        f"*Seed {seed}*",
        "",
        "| Bits | PSNR vs. Re-encoded | PSNR vs. Original | Note |",
        "|------|---------------------|-------------------|------|",
    ]
    for row in rows:
        if row.error:
            lines.append(f"| {row.payload_bits} | - | - | {row.error} |")
        else:
            lines.append(f"| {row.payload_bits} | {format_db(row.psnr_baseline)} | {format_db(row.psnr_cover)} | |")
    return "\n".join(lines)
