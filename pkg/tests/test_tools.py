"""
Tests for the MCP tool functions
"""
import pytest

from src.tools.evaluation import payload_fidelity_sweep
from src.tools.indexing import build_image_index
from src.tools.retrieval import search_similar_images
from src.tools.stego import embed_image_attributes, extract_image_attributes, format_db


@pytest.mark.asyncio
async def test_build_image_index(small_corpus, tmp_path):
    """Test indexing a corpus through the tool"""
    out = tmp_path / "corpus.idx"
    result = await build_image_index(str(small_corpus), str(out))

    assert result.startswith(f"# Index of {small_corpus}")
    assert "**Records**: 6" in result
    assert "5 scales x 6 orientations (60 features)" in result
    assert out.read_bytes().startswith(b"TEXSEEK-INDEX v1")


@pytest.mark.asyncio
async def test_build_image_index_with_embedding(small_corpus, tmp_path):
    """Test small images are listed as indexed without embedding"""
    result = await build_image_index(str(small_corpus), str(tmp_path / "corpus.idx"), embed=True)

    assert "**Stego images written**: 0" in result
    assert "## Indexed Without Embedding" in result
    assert "- c0_00.pgm" in result


@pytest.mark.asyncio
async def test_build_image_index_errors(tmp_path):
    """Test error strings instead of exceptions"""
    assert await build_image_index("", "") == "Error: corpus_dir and out_path are required"
    result = await build_image_index(str(tmp_path), str(tmp_path / "x.idx"))
    assert result.startswith("Error building index")


@pytest.mark.asyncio
async def test_search_similar_images(small_corpus, tmp_path):
    """Test a query returns a Markdown table led by the query itself"""
    index_path = tmp_path / "corpus.idx"
    await build_image_index(str(small_corpus), str(index_path))

    result = await search_similar_images(str(small_corpus / "c0_01.pgm"), str(index_path), top=2)

    lines = result.splitlines()
    assert lines[0] == f"# Images Similar to {small_corpus / 'c0_01.pgm'}"
    assert "| Rank | Distance | Image |" in lines
    assert lines[-2].startswith("| 1 |") and lines[-2].endswith("| c0_01.pgm |")
    assert lines[-1].startswith("| 2 |")


@pytest.mark.asyncio
async def test_search_from_stego_falls_back(small_corpus, tmp_path):
    """Test a plain query image with from_stego uses its pixels"""
    index_path = tmp_path / "corpus.idx"
    await build_image_index(str(small_corpus), str(index_path))

    result = await search_similar_images(str(small_corpus / "c1_00.pgm"), str(index_path), top=1, from_stego=True)

    assert "*No embedded attributes found; features computed from pixels*" in result
    assert "| c1_00.pgm |" in result


@pytest.mark.asyncio
async def test_search_errors(small_corpus, tmp_path):
    """Test error strings for bad inputs"""
    assert await search_similar_images("q.pgm", "x.idx", top=-1) == "Error: top must not be negative"
    result = await search_similar_images(str(small_corpus / "c0_00.pgm"), str(tmp_path / "missing.idx"))
    assert result.startswith("Error loading query inputs")

    index_path = tmp_path / "corpus.idx"
    await build_image_index(str(small_corpus), str(index_path))
    assert (await search_similar_images(str(small_corpus / "c0_00.pgm"), str(index_path), top=0)).endswith("No results")


@pytest.mark.asyncio
async def test_embed_and_extract_attributes(texture_512, write_image, tmp_path):
    """Test embedding into a large cover and reading the attributes back"""
    cover = write_image(texture_512, "cover.pgm")
    stego = tmp_path / "cover.stego.pgm"

    result = await embed_image_attributes(str(cover), str(stego), "title=granite;site=quarry")
    assert result.startswith(f"# Stego Image {stego}")
    assert "of 4096 available" in result
    assert " dB" in result

    extracted = await extract_image_attributes(str(stego))
    assert "| title | granite |" in extracted
    assert "| size | 512x512 |" in extracted
    assert "**Dominant orientation**: 0" in extracted


@pytest.mark.asyncio
async def test_embed_errors(texture_128, write_image, tmp_path):
    """Test error strings for bad attributes and small covers"""
    cover = write_image(texture_128, "small.pgm")
    assert (await embed_image_attributes(str(cover), str(tmp_path / "o.pgm"), "novalue")).startswith("Error:")
    result = await embed_image_attributes(str(cover), str(tmp_path / "o.pgm"))
    assert result.startswith("Error embedding attributes")
    assert "capacity" in result


@pytest.mark.asyncio
async def test_extract_from_plain_image(texture_128, write_image):
    """Test a plain image reports no embedded attributes"""
    result = await extract_image_attributes(str(write_image(texture_128)))
    assert result.startswith("Error reading")
    assert "no embedded attributes" in result


@pytest.mark.asyncio
async def test_payload_fidelity_sweep(texture_128, write_image):
    """Test the sweep table, including an over-capacity row"""
    result = await payload_fidelity_sweep(str(write_image(texture_128)), "0,100,300", seed=7)

    lines = result.splitlines()
    assert lines[1] == "*Seed 7*"
    assert lines[5].startswith("| 0 | identical (inf) |")
    assert lines[6].startswith("| 100 | ")
    assert lines[7].startswith("| 300 | - | - |")
    assert "exceeds capacity" in lines[7]


@pytest.mark.asyncio
async def test_payload_fidelity_sweep_errors(tmp_path):
    """Test error strings for bad sizes and missing covers"""
    assert (await payload_fidelity_sweep("c.pgm", "10,x")).startswith("Error: sizes")
    assert await payload_fidelity_sweep("c.pgm", " , ") == "Error: at least one payload size is required"
    assert (await payload_fidelity_sweep(str(tmp_path / "c.pgm"), "10")).startswith("Error running sweep")


def test_format_db():
    assert format_db(float("inf")) == "identical (inf)"
    assert format_db(41.237) == "41.24 dB"
