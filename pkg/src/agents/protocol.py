"""
Broker/provider wire protocol

Every message is a 4-byte big-endian length followed by that many bytes of
UTF-8 JSON: one object whose "type" field names the message and whose other
fields are the body. One request stream runs per TCP connection.
"""
import asyncio
import json
import logging
import struct
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from src.errors import FramingError, ProtocolError, ShortReadError
from src.imaging.gabor import FeatureVector
from src.retrieval.index import IndexRecord
from src.retrieval.search import RankedResult

logger = logging.getLogger(__name__)

MAX_FRAME = 16 * 1024 * 1024
PREFIX = struct.Struct(">I")

MESSAGE_TYPES = frozenset({
    "hello",
    "index_request",
    "feature_record",
    "index_done",
    "query_request",
    "query_result",
    "error",
    "image_request",
    "image_result",
})


@dataclass
class Message:
    type: str
    body: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.type not in MESSAGE_TYPES:
            raise ProtocolError(f"unknown message type {self.type!r}")
        if "type" in self.body:
            raise ProtocolError("message body must not carry a 'type' field")


def frame(message: Message) -> bytes:
    """
    Encode a message as length prefix plus JSON

    Args:
        message: Message to send

    Returns:
        Frame bytes

    Raises:
        FramingError: Encoded body larger than 16 MiB
    """
    try:
        payload = json.dumps(
            {"type": message.type, **message.body}, sort_keys=True, separators=(",", ":"), allow_nan=False
        ).encode("utf-8")
    except (TypeError, ValueError) as exc:
        raise ProtocolError(f"message body is not serializable: {exc}") from exc
    if len(payload) > MAX_FRAME:
        raise FramingError(f"frame of {len(payload)} bytes exceeds {MAX_FRAME}")
    return PREFIX.pack(len(payload)) + payload


def decode_body(payload: bytes) -> Message:
    """Parse the JSON part of a frame"""
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise ProtocolError(f"malformed message: {exc}") from exc
    if not isinstance(obj, dict) or not isinstance(obj.get("type"), str):
        raise ProtocolError("message is not a JSON object with a 'type' field")
    message_type = obj.pop("type")
    return Message(message_type, obj)


def unframe(data: bytes) -> Message:
    """
    Decode exactly one frame

    Args:
        data: Frame bytes

    Returns:
        The Message

    Raises:
        ShortReadError: Fewer bytes than the prefix announces
        FramingError: Announced length over 16 MiB
        ProtocolError: Malformed JSON, unknown type, or trailing bytes
    """
    if len(data) < PREFIX.size:
        raise ShortReadError()
    (length,) = PREFIX.unpack_from(data)
    if length > MAX_FRAME:
        raise FramingError(f"frame of {length} bytes exceeds {MAX_FRAME}")
    payload = data[PREFIX.size:]
    if len(payload) < length:
        raise ShortReadError()
    if len(payload) > length:
        raise ProtocolError(f"{len(payload) - length} trailing bytes after frame")
    return decode_body(payload)


async def read_message(reader: asyncio.StreamReader) -> Optional[Message]:
    """
    Read one framed message from a stream

    Returns:
        The Message, or None when the peer closed cleanly between frames
    """
    try:
        prefix = await reader.readexactly(PREFIX.size)
    except asyncio.IncompleteReadError as exc:
        if not exc.partial:
            return None
        raise ShortReadError() from exc
    (length,) = PREFIX.unpack(prefix)
    if length > MAX_FRAME:
        raise FramingError(f"frame of {length} bytes exceeds {MAX_FRAME}")
    try:
        payload = await reader.readexactly(length)
    except asyncio.IncompleteReadError as exc:
        raise ShortReadError() from exc
    return decode_body(payload)


async def write_message(writer: asyncio.StreamWriter, message: Message) -> None:
    writer.write(frame(message))
    await writer.drain()


def expect(message: Optional[Message], *types: str) -> Message:
    """Check a reply's type; error replies and EOF become exceptions"""
    if message is None:
        raise ShortReadError("connection closed by peer")
    if message.type == "error" and "error" not in types:
        raise ProtocolError(str(message.body.get("message", "remote error")))
    if message.type not in types:
        raise ProtocolError(f"expected {' or '.join(types)}, got {message.type}")
    return message


def error_message(text: str) -> Message:
    return Message("error", {"message": text})


def features_body(features: FeatureVector) -> Dict[str, Any]:
    return {
        "features": [float(value) for value in features.values],
        "dominant": features.dominant_orientation,
        "scales": features.scales,
        "orientations": features.orientations,
    }


def features_from_body(body: Dict[str, Any]) -> FeatureVector:
    try:
        return FeatureVector(
            values=[float(value) for value in body["features"]],
            dominant_orientation=int(body["dominant"]),
            scales=int(body["scales"]),
            orientations=int(body["orientations"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed feature body: {exc!r}") from exc


def record_body(record: IndexRecord) -> Dict[str, Any]:
    return {"id": record.id, "attributes": dict(record.attributes), **features_body(record.features)}


def record_from_body(body: Dict[str, Any], prefix: str = "") -> IndexRecord:
    """Rebuild a streamed record, optionally prefixing its id with an archive label"""
    attributes = body.get("attributes", {})
    if not isinstance(body.get("id"), str) or not isinstance(attributes, dict):
        raise ProtocolError("malformed feature_record")
    return IndexRecord(
        id=f"{prefix}{body['id']}",
        features=features_from_body(body),
        attributes={str(key): str(value) for key, value in attributes.items()},
    )


def results_body(results: List[RankedResult]) -> Dict[str, Any]:
    return {"results": [[result.distance, result.id] for result in results]}


def results_from_body(body: Dict[str, Any], prefix: str = "") -> List[RankedResult]:
    try:
        return [RankedResult(float(distance), f"{prefix}{image_id}") for distance, image_id in body["results"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed query_result: {exc!r}") from exc
