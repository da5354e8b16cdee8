"""
Test fixtures for TexSeek testing
"""
import pathlib

import numpy as np
import pytest

from src.imaging.image import GrayImage, save_image
from src.retrieval.corpus import gen_corpus, texture


@pytest.fixture(autouse=True)
def isolate_environment(monkeypatch):
    """Keep a developer's TexSeek settings out of the tests"""
    for name in ("TEXSEEK_CONFIG", "TEXSEEK_LOG", "TEXSEEK_TIMEOUT"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def rng():
    """Seeded generator so every run sees the same data"""
    return np.random.default_rng(20240611)


@pytest.fixture
def random_image(rng):
    """64x64 image of uniform noise"""
    return GrayImage.from_array(rng.integers(0, 256, size=(64, 64), dtype=np.uint8))


@pytest.fixture
def texture_128():
    """128x128 grating texture with noise (256 blocks of capacity)"""
    return texture(np.random.default_rng(7), 128, 0)


@pytest.fixture(scope="session")
def texture_512():
    """512x512 grating texture, large enough to carry a full feature payload"""
    return texture(np.random.default_rng(11), 512, 2)


@pytest.fixture
def small_corpus(tmp_path):
    """Two classes of three 64x64 textures, with manifest"""
    root = tmp_path / "corpus"
    gen_corpus(root, classes=2, per_class=3, size=64, seed=3)
    return root


@pytest.fixture
def write_image(tmp_path):
    """Save a GrayImage under tmp_path and return its path"""
    def _write(img: GrayImage, name: str = "image.pgm") -> pathlib.Path:
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        save_image(img, path)
        return path
    return _write
