"""
Query-by-example tools for the TexSeek MCP server
"""
import asyncio
import pathlib

from src.config import load_settings
from src.errors import NoEmbeddedAttributesError, TexSeekError
from src.imaging.image import load_image
from src.retrieval.index import load_index
from src.retrieval.search import query_from_image, query_from_stego


async def search_similar_images(image_path: str, index_path: str, top: int = 10, from_stego: bool = False) -> str:
    """
    Find the indexed images whose texture is closest to a query image

    Args:
        image_path: Query image (PGM/PPM)
        index_path: Index file written by build_image_index
        top: Number of results (default: 10)
        from_stego: Use the features embedded in the query image instead of recomputing them

    Returns:
        Ranked table of image ids and distances
    """
    if top < 0:
        return "Error: top must not be negative"

    try:
        settings = load_settings()
        index = load_index(await asyncio.to_thread(pathlib.Path(index_path).read_bytes))
        img = await asyncio.to_thread(load_image, image_path)
    except (TexSeekError, OSError) as e:
        return f"Error loading query inputs: {e}"

    note = None
    try:
        if from_stego:
            try:
                results = await asyncio.to_thread(query_from_stego, img, index, top, settings)
                note = "Features read from the query image's embedded attributes"
            except NoEmbeddedAttributesError:
                results = await asyncio.to_thread(query_from_image, img, index, top, settings)
                note = "No embedded attributes found; features computed from pixels"
        else:
            results = await asyncio.to_thread(query_from_image, img, index, top, settings)
    except TexSeekError as e:
        return f"Error searching {index_path}: {e}"

    lines = [f"# Images Similar to {image_path}"]
    if note:
        lines.append(f"*{note}*")
    lines.append("")
    if not results:
        lines.append("No results")
        return "\n".join(lines)

    lines.append("| Rank | Distance | Image |")
    lines.append("|------|----------|-------|")
    for position, result in enumerate(results, start=1):
        lines.append(f"| {position} | {result.distance:.6g} | {result.id} |")
    return "\n".join(lines)
