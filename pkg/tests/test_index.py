"""
Tests for the feature index and its file format
"""
import numpy as np
import pytest

from src.config import Settings, config_hash
from src.errors import IndexFormatError
from src.imaging.gabor import FeatureVector
from src.retrieval.index import (
    Index,
    IndexRecord,
    format_attributes,
    load_index,
    parse_attributes,
    save_index,
)


def make_record(rng, record_id, **attributes):
    return IndexRecord(record_id, FeatureVector(rng.random(60) * 50, dominant_orientation=0), attributes)


@pytest.fixture
def index(rng):
    records = [
        make_record(rng, "b/two.pgm", size="64x64"),
        make_record(rng, "a/one.pgm", size="64x64", embedded="no"),
        make_record(rng, "tab\there%.pgm"),
    ]
    return Index.from_records(records, Settings())


def test_records_sorted_by_id(index):
    assert index.ids == ("a/one.pgm", "b/two.pgm", "tab\there%.pgm")
    assert len(index) == 3
    assert index.dimensions == 60


def test_record_features_are_float32(rng):
    record = make_record(rng, "x")
    assert np.array_equal(record.features.values, record.features.values.astype(np.float32))


def test_record_rejects_unnormalized(rng):
    with pytest.raises(IndexFormatError):
        IndexRecord("x", FeatureVector(rng.random(60), dominant_orientation=2))


def test_duplicate_id(rng):
    with pytest.raises(IndexFormatError, match="duplicate"):
        Index.from_records([make_record(rng, "x"), make_record(rng, "x")], Settings())


def test_layout_mismatch(rng):
    record = IndexRecord("x", FeatureVector(rng.random(40), dominant_orientation=0, scales=4, orientations=5))
    with pytest.raises(IndexFormatError):
        Index.from_records([record], Settings())


def test_header_line(index):
    first = save_index(index).decode("utf-8").split("\n")[0]
    assert first == f"TEXSEEK-INDEX v1 M=5 N=6 cfg={config_hash(Settings())}"


def test_record_line_layout(index):
    lines = save_index(index).decode("utf-8").split("\n")
    fields = lines[1].split("\t")
    assert fields[0] == "a/one.pgm"
    assert len(fields[1].split(" ")) == 60
    assert fields[2] == "0"
    assert fields[3] == "size=64x64;embedded=no"
    assert lines[3].startswith("tab%09here%25.pgm\t")
    assert lines[-1] == ""


def test_save_load_round_trip(index):
    data = save_index(index)
    loaded = load_index(data)
    assert loaded == index
    assert loaded.get("tab\there%.pgm").attributes == {}
    assert save_index(loaded) == data


def test_empty_index_round_trip():
    index = Index.from_records([], Settings())
    assert load_index(save_index(index)) == index


@pytest.mark.parametrize("mutate, message", [
    (lambda text: text.replace("v1", "v2", 1), "version"),
    (lambda text: text.replace("TEXSEEK-INDEX", "OTHER-INDEX", 1), "header"),
    (lambda text: text + "extra\tline\n", "fields"),
    (lambda text: text.replace("\t0\t", "\tzero\t", 1), "line 2"),
])
def test_load_rejects_bad_files(index, mutate, message):
    data = mutate(save_index(index).decode("utf-8")).encode("utf-8")
    with pytest.raises(IndexFormatError, match=message):
        load_index(data)


def test_load_rejects_wrong_dimension_count(index):
    lines = save_index(index).decode("utf-8").split("\n")
    fields = lines[1].split("\t")
    fields[1] = " ".join(fields[1].split(" ")[:59])
    lines[1] = "\t".join(fields)
    with pytest.raises(IndexFormatError, match="expected 60"):
        load_index("\n".join(lines).encode("utf-8"))


def test_load_rejects_duplicates(index):
    lines = save_index(index).decode("utf-8").split("\n")
    data = "\n".join([lines[0], lines[1], lines[1], ""]).encode("utf-8")
    with pytest.raises(IndexFormatError, match="duplicate"):
        load_index(data)


def test_load_rejects_non_utf8():
    with pytest.raises(IndexFormatError):
        load_index(b"\xff\xfe")


def test_attribute_escaping():
    attributes = {"title": "a;b=c", "path": "50%\tdone"}
    text = format_attributes(attributes)
    assert "\t" not in text
    assert parse_attributes(text) == attributes
    assert parse_attributes("") == {}
    with pytest.raises(IndexFormatError):
        parse_attributes("novalue")
