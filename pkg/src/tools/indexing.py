"""
Indexing tools for the TexSeek MCP server

Builds a feature index over a directory of PGM/PPM images, optionally hiding
each image's features and attributes inside it.
"""
import asyncio
import pathlib

from src.config import load_settings
from src.errors import TexSeekError
from src.retrieval.index import save_index
from src.retrieval.search import build_index


async def build_image_index(corpus_dir: str, out_path: str, embed: bool = False) -> str:
    """
    Compute texture features for every image in a directory and save the index

    Args:
        corpus_dir: Directory of PGM/PPM images (searched recursively)
        out_path: Where to write the index file
        embed: Also write a <name>.stego.pgm next to each image carrying its features

    Returns:
        Summary of indexed, skipped and unembedded images
    """
    if not corpus_dir or not out_path:
        return "Error: corpus_dir and out_path are required"

    try:
        settings = load_settings()
        result = await asyncio.to_thread(build_index, corpus_dir, settings, embed)
        await asyncio.to_thread(pathlib.Path(out_path).write_bytes, save_index(result.index))
    except (TexSeekError, OSError) as e:
        return f"Error building index for {corpus_dir}: {e}"

    index = result.index
    lines = [
        f"# Index of {corpus_dir}",
        f"**Records**: {len(index)}",
        f"**Layout**: {index.scales} scales x {index.orientations} orientations ({index.dimensions} features)",
        f"**Config**: {index.cfg_hash}",
        f"**Saved to**: {out_path}",
    ]
    if embed:
        lines.append(f"**Stego images written**: {len(result.stego_paths)}")
    if result.unembedded:
        lines.append("")
        lines.append("## Indexed Without Embedding")
        lines.extend(f"- {record_id}" for record_id in result.unembedded)
    if result.warnings:
        lines.append("")
        lines.append("## Warnings")
        lines.extend(f"- {warning}" for warning in result.warnings)
    return "\n".join(lines)
