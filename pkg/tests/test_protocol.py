"""
Tests for the length-prefixed JSON wire protocol
"""
import asyncio
import json
import struct

import numpy as np
import pytest

from src.agents.protocol import (
    MAX_FRAME,
    MESSAGE_TYPES,
    Message,
    decode_body,
    error_message,
    expect,
    frame,
    read_message,
    record_body,
    record_from_body,
    results_body,
    results_from_body,
    unframe,
)
from src.errors import FramingError, ProtocolError, ShortReadError
from src.imaging.gabor import FeatureVector
from src.retrieval.index import IndexRecord
from src.retrieval.search import RankedResult


def raw_frame(obj) -> bytes:
    payload = json.dumps(obj).encode("utf-8")
    return struct.pack(">I", len(payload)) + payload


def test_prefix_is_body_length():
    data = frame(Message("query_request", {"k": 5, "cfg": "abc"}))
    (length,) = struct.unpack(">I", data[:4])
    assert length == len(data) - 4
    assert data[4:] == b'{"cfg":"abc","k":5,"type":"query_request"}'


@pytest.mark.parametrize("message_type", sorted(MESSAGE_TYPES))
def test_every_message_type_survives_framing(message_type):
    message = Message(message_type, {"value": [1, 2.5, "x"], "nested": {"a": None}})
    assert unframe(frame(message)) == message


def test_unknown_type():
    with pytest.raises(ProtocolError, match="unknown message type"):
        Message("gossip")
    with pytest.raises(ProtocolError, match="unknown message type"):
        unframe(raw_frame({"type": "gossip"}))


def test_body_cannot_carry_type():
    with pytest.raises(ProtocolError):
        Message("hello", {"type": "error"})


def test_truncated_frame():
    data = frame(Message("hello", {"cfg": "abc"}))
    with pytest.raises(ShortReadError):
        unframe(data[:-1])
    with pytest.raises(ShortReadError):
        unframe(data[:2])


def test_trailing_bytes():
    with pytest.raises(ProtocolError, match="trailing"):
        unframe(frame(Message("hello")) + b"x")


def test_oversized_frame():
    with pytest.raises(FramingError):
        unframe(struct.pack(">I", MAX_FRAME + 1))
    with pytest.raises(FramingError):
        frame(Message("error", {"message": "x" * (MAX_FRAME + 1)}))


@pytest.mark.parametrize("payload", [b"not json", b"[1, 2]", b'{"no_type": 1}', b"\xff\xfe"])
def test_malformed_body(payload):
    with pytest.raises(ProtocolError):
        decode_body(payload)


def test_non_finite_numbers_are_rejected():
    with pytest.raises(ProtocolError):
        frame(Message("query_request", {"k": float("nan")}))


@pytest.mark.asyncio
async def test_read_message_from_stream():
    reader = asyncio.StreamReader()
    reader.feed_data(frame(Message("hello", {"cfg": "abc"})) + frame(error_message("boom")))
    reader.feed_eof()
    assert await read_message(reader) == Message("hello", {"cfg": "abc"})
    assert await read_message(reader) == Message("error", {"message": "boom"})
    assert await read_message(reader) is None


@pytest.mark.asyncio
async def test_read_message_truncated_stream():
    reader = asyncio.StreamReader()
    reader.feed_data(frame(Message("hello"))[:-2])
    reader.feed_eof()
    with pytest.raises(ShortReadError):
        await read_message(reader)


@pytest.mark.asyncio
async def test_read_message_oversized_prefix():
    reader = asyncio.StreamReader()
    reader.feed_data(struct.pack(">I", MAX_FRAME + 1))
    reader.feed_eof()
    with pytest.raises(FramingError):
        await read_message(reader)


def test_expect():
    hello = Message("hello")
    assert expect(hello, "hello") is hello
    with pytest.raises(ProtocolError, match="config mismatch"):
        expect(error_message("config mismatch"), "hello")
    with pytest.raises(ProtocolError, match="expected index_done"):
        expect(hello, "index_done")
    with pytest.raises(ShortReadError):
        expect(None, "hello")


def test_record_body_round_trip(rng):
    record = IndexRecord("dir/a.pgm", FeatureVector(rng.random(60), 0), {"size": "64x64"})
    message = unframe(frame(Message("feature_record", record_body(record))))
    rebuilt = record_from_body(message.body, prefix="archive/")
    assert rebuilt.id == "archive/dir/a.pgm"
    assert rebuilt.attributes == {"size": "64x64"}
    assert np.array_equal(rebuilt.features.values, record.features.values)


def test_record_from_malformed_body():
    with pytest.raises(ProtocolError):
        record_from_body({"id": 3, "features": []})
    with pytest.raises(ProtocolError):
        record_from_body({"id": "a", "dominant": 0})


def test_results_body_round_trip():
    results = [RankedResult(0.5, "a.pgm"), RankedResult(1.25, "b.pgm")]
    body = unframe(frame(Message("query_result", results_body(results)))).body
    assert results_from_body(body, "x/") == [RankedResult(0.5, "x/a.pgm"), RankedResult(1.25, "x/b.pgm")]
    with pytest.raises(ProtocolError):
        results_from_body({"results": [[1.0]]})
