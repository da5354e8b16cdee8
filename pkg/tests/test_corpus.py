"""
Tests for the synthetic texture corpus
"""
import numpy as np
import pytest

from src.errors import UsageError
from src.imaging.image import load_image
from src.retrieval.corpus import CLASS_TABLE, MANIFEST_NAME, gen_corpus, grating, load_manifest, texture


def test_gen_corpus_layout(tmp_path):
    manifest = gen_corpus(tmp_path, classes=3, per_class=2, size=64, seed=1)
    assert manifest == [
        ("c0_00.pgm", "c0"), ("c0_01.pgm", "c0"),
        ("c1_00.pgm", "c1"), ("c1_01.pgm", "c1"),
        ("c2_00.pgm", "c2"), ("c2_01.pgm", "c2"),
    ]
    assert (tmp_path / MANIFEST_NAME).read_text() == "".join(f"{i}\t{c}\n" for i, c in manifest)
    assert load_image(tmp_path / "c2_01.pgm").shape == (64, 64)


def test_same_seed_same_bytes(tmp_path):
    gen_corpus(tmp_path / "a", classes=2, per_class=2, size=64, seed=9)
    gen_corpus(tmp_path / "b", classes=2, per_class=2, size=64, seed=9)
    for name in ("c0_00.pgm", "c1_01.pgm", MANIFEST_NAME):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_different_seed_differs(tmp_path):
    gen_corpus(tmp_path / "a", classes=1, per_class=1, size=64, seed=1)
    gen_corpus(tmp_path / "b", classes=1, per_class=1, size=64, seed=2)
    assert (tmp_path / "a" / "c0_00.pgm").read_bytes() != (tmp_path / "b" / "c0_00.pgm").read_bytes()


@pytest.mark.parametrize("kwargs", [
    {"classes": 9},
    {"classes": 0},
    {"size": 32},
    {"per_class": 0},
])
def test_gen_corpus_rejects_bad_arguments(tmp_path, kwargs):
    with pytest.raises(UsageError):
        gen_corpus(tmp_path, **kwargs)


def test_grating_range():
    values = grating(64, 30.0, 0.1)
    assert values.shape == (64, 64)
    assert values.min() >= 28.0 - 1e-9 and values.max() <= 228.0 + 1e-9
    assert values[0, 0] == pytest.approx(228.0)


def test_texture_stays_in_range():
    img = texture(np.random.default_rng(0), 64, len(CLASS_TABLE) - 1)
    assert img.pixels.dtype == np.uint8
    assert 0 < img.pixels.min() and img.pixels.max() < 255


def test_load_manifest(tmp_path):
    path = tmp_path / "manifest.tsv"
    path.write_text("a.pgm\tc0\n\nb.pgm\tc1\n")
    assert load_manifest(path) == {"a.pgm": "c0", "b.pgm": "c1"}
    path.write_text("no tab here\n")
    with pytest.raises(UsageError, match="line 1"):
        load_manifest(path)
