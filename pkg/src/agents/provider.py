"""
Provider node: holds an image archive, computes its features locally and
answers index, query and image requests from a broker
"""
import asyncio
import base64
import logging
import pathlib
from typing import Optional, Union

from src.config import Settings, config_hash
from src.errors import FramingError, ProtocolError, ShortReadError, TexSeekError
from src.imaging.image import load_image, write_pgm
from src.retrieval.index import Index
from src.retrieval.search import build_index, rank
from src.agents.protocol import (
    Message,
    error_message,
    features_from_body,
    read_message,
    record_body,
    results_body,
    write_message,
)

logger = logging.getLogger(__name__)


class Provider:
    """
    One archive served over the wire protocol

    The local index is built on first use and then reused for every
    connection.
    """

    def __init__(self, corpus_dir: Union[str, pathlib.Path], settings: Settings = Settings(), label: Optional[str] = None):
        self.corpus_dir = pathlib.Path(corpus_dir).resolve()
        self.settings = settings
        self.label = label or self.corpus_dir.name
        self.cfg_hash = config_hash(settings)
        self._index: Optional[Index] = None
        self._lock = asyncio.Lock()

    async def index(self) -> Index:
        async with self._lock:
            if self._index is None:
                result = await asyncio.to_thread(build_index, self.corpus_dir, self.settings)
                self._index = result.index
                logger.info("provider %s indexed %d images", self.label, len(self._index))
        return self._index

    def hello(self) -> Message:
        bank = self.settings.bank
        return Message(
            "hello",
            {"cfg": self.cfg_hash, "label": self.label, "scales": bank.scales, "orientations": bank.orientations},
        )

    def _config_matches(self, message: Message) -> bool:
        return message.body.get("cfg") == self.cfg_hash

    async def _send_index(self, writer: asyncio.StreamWriter) -> None:
        index = await self.index()
        for record in index.records:
            await write_message(writer, Message("feature_record", record_body(record)))
        await write_message(writer, Message("index_done", {"count": len(index)}))

    async def _answer_query(self, message: Message) -> Message:
        features = features_from_body(message.body)
        k = message.body.get("k")
        if not isinstance(k, int):
            raise ProtocolError("query_request needs an integer k")
        index = await self.index()
        return Message("query_result", results_body(rank(features, index, k)))

    def _resolve_image(self, image_id: object) -> pathlib.Path:
        if not isinstance(image_id, str) or not image_id:
            raise ProtocolError("image_request needs an id")
        path = (self.corpus_dir / image_id).resolve()
        if not path.is_relative_to(self.corpus_dir) or not path.is_file():
            raise ProtocolError(f"no image {image_id!r} in archive {self.label}")
        return path

    async def _send_image(self, message: Message) -> Message:
        image_id = message.body.get("id")
        path = self._resolve_image(image_id)
        img = await asyncio.to_thread(load_image, path)
        return Message("image_result", {"id": image_id, "pgm_b64": base64.b64encode(write_pgm(img)).decode("ascii")})

    async def handle(self, message: Message, writer: asyncio.StreamWriter) -> None:
        """Answer one request on a connection"""
        if message.type == "hello":
            await write_message(writer, self.hello())
        elif message.type in ("index_request", "query_request") and not self._config_matches(message):
            logger.warning("rejecting %s with cfg=%s", message.type, message.body.get("cfg"))
            await write_message(writer, error_message("config mismatch"))
        elif message.type == "index_request":
            await self._send_index(writer)
        elif message.type == "query_request":
            await write_message(writer, await self._answer_query(message))
        elif message.type == "image_request":
            await write_message(writer, await self._send_image(message))
        else:
            raise ProtocolError(f"unexpected {message.type} from broker")

    async def serve_connection(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        """Process requests sequentially until the broker disconnects"""
        peer = writer.get_extra_info("peername")
        try:
            while True:
                try:
                    message = await read_message(reader)
                    if message is None:
                        break
                    await self.handle(message, writer)
                except ShortReadError:
                    logger.warning("short read from %s, closing", peer)
                    break
                except ProtocolError as exc:
                    # framing is unrecoverable, everything else keeps the stream in sync
                    logger.warning("protocol error from %s: %s", peer, exc)
                    await write_message(writer, error_message(str(exc)))
                    if isinstance(exc, FramingError):
                        break
                except TexSeekError as exc:
                    logger.warning("request from %s failed: %s", peer, exc)
                    await write_message(writer, error_message(str(exc)))
        except (ConnectionError, OSError) as exc:
            logger.warning("connection to %s lost: %s", peer, exc)
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass


async def serve_provider(
    host: str,
    port: int,
    corpus_dir: Union[str, pathlib.Path],
    settings: Settings = Settings(),
    label: Optional[str] = None,
) -> asyncio.AbstractServer:
    """
    Start listening for broker connections

    Args:
        host: Interface to bind
        port: TCP port; 0 picks a free one
        corpus_dir: The archive served
        settings: Feature settings; brokers must present the same config hash
        label: Archive label reported in hello replies

    Returns:
        The started asyncio server
    """
    provider = Provider(corpus_dir, settings, label)
    server = await asyncio.start_server(provider.serve_connection, host, port)
    bound = server.sockets[0].getsockname()
    logger.info("provider %s serving %s on %s:%s", provider.label, provider.corpus_dir, bound[0], bound[1])
    return server
