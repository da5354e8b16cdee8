"""
Index resources for the TexSeek MCP server
"""
import json
import pathlib
from urllib.parse import unquote

from src.errors import TexSeekError
from src.retrieval.index import load_index


async def get_index_resource(path: str) -> str:
    """
    Summarize an index file

    Args:
        path: URL-quoted path of the index file

    Returns:
        JSON with the header fields, record count and ids
    """
    index_path = pathlib.Path(unquote(path))
    try:
        index = load_index(index_path.read_bytes())
    except (TexSeekError, OSError) as e:
        return json.dumps({"error": f"Cannot read index {index_path}", "message": str(e)})

    return json.dumps({
        "path": str(index_path),
        "scales": index.scales,
        "orientations": index.orientations,
        "cfg": index.cfg_hash,
        "records": len(index),
        "ids": list(index.ids),
    }, indent=2)
