"""
Broker: dispatches indexing tasks and queries to provider nodes and merges
their replies

Provider replies are gathered concurrently and merged with a deterministic
sort, so the merged index never depends on reply arrival order.
"""
import asyncio
import base64
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from src.config import Settings, config_hash
from src.errors import (
    ConfigMismatchError,
    ProtocolError,
    ProviderUnavailableError,
    TexSeekError,
    UsageError,
)
from src.imaging.gabor import FeatureVector, normalize_rotation
from src.imaging.image import GrayImage, read_pnm
from src.retrieval.index import Index, IndexRecord
from src.retrieval.search import RankedResult
from src.agents.protocol import (
    Message,
    expect,
    features_body,
    read_message,
    record_from_body,
    results_from_body,
    write_message,
)

logger = logging.getLogger(__name__)

TIMEOUT_ENV_VAR = "TEXSEEK_TIMEOUT"
DEFAULT_TIMEOUT = 30.0
LABEL_SEPARATOR = "/"


def resolve_timeout(value: Optional[float] = None) -> float:
    """An explicit timeout, else TEXSEEK_TIMEOUT, else 30 seconds"""
    if value is not None:
        return value
    try:
        return float(os.environ.get(TIMEOUT_ENV_VAR, DEFAULT_TIMEOUT))
    except ValueError as exc:
        raise UsageError(f"{TIMEOUT_ENV_VAR} must be a number of seconds") from exc


@dataclass(frozen=True)
class ProviderEndpoint:
    host: str
    port: int
    label: Optional[str] = None

    def __str__(self) -> str:
        address = f"{self.host}:{self.port}"
        return f"{self.label}={address}" if self.label else address


def parse_endpoint(text: str) -> ProviderEndpoint:
    """
    Parse a provider address of the form [label=]host:port

    Args:
        text: Address text, e.g. "rocks=10.0.0.5:7070" or "localhost:7070"

    Returns:
        The ProviderEndpoint
    """
    label, sep, address = text.partition("=")
    if not sep:
        label, address = None, text
    host, sep, port = address.rpartition(":")
    if not sep or not host:
        raise UsageError(f"provider address must be [label=]host:port, got {text!r}")
    try:
        number = int(port)
    except ValueError as exc:
        raise UsageError(f"provider port is not a number: {text!r}") from exc
    if not 0 < number < 65536:
        raise UsageError(f"provider port out of range: {text!r}")
    if label is not None and (not label or LABEL_SEPARATOR in label):
        raise UsageError(f"archive label must be non-empty and contain no '/': {text!r}")
    return ProviderEndpoint(host=host, port=number, label=label)


@dataclass
class DispatchResult:
    index: Index
    failures: List[str] = field(default_factory=list)
    counts: Dict[str, int] = field(default_factory=dict)


@dataclass
class QueryOutcome:
    results: List[RankedResult]
    failures: List[str] = field(default_factory=list)


class ProviderSession:
    """One connection to a provider, opened with a hello exchange"""

    def __init__(self, endpoint: ProviderEndpoint, settings: Settings, timeout: Optional[float] = None):
        self.endpoint = endpoint
        self.settings = settings
        self.timeout = resolve_timeout(timeout)
        self.cfg_hash = config_hash(settings)
        self.label: Optional[str] = endpoint.label
        self._reader: Optional[asyncio.StreamReader] = None
        self._writer: Optional[asyncio.StreamWriter] = None

    async def __aenter__(self) -> "ProviderSession":
        self._reader, self._writer = await asyncio.wait_for(
            asyncio.open_connection(self.endpoint.host, self.endpoint.port), self.timeout
        )
        try:
            reply = await self.request(Message("hello", {"cfg": self.cfg_hash}), "hello")
        except BaseException:
            await self.close()
            raise
        remote_label = reply.body.get("label")
        if self.label is None:
            if not isinstance(remote_label, str) or not remote_label or LABEL_SEPARATOR in remote_label:
                await self.close()
                raise ProtocolError(f"provider {self.endpoint} sent an unusable label {remote_label!r}")
            self.label = remote_label
        return self

    async def __aexit__(self, *exc_info) -> None:
        await self.close()

    async def close(self) -> None:
        if self._writer is not None:
            self._writer.close()
            try:
                await self._writer.wait_closed()
            except (ConnectionError, OSError):
                pass
            self._writer = None

    async def send(self, message: Message) -> None:
        await asyncio.wait_for(write_message(self._writer, message), self.timeout)

    async def receive(self, *types: str) -> Message:
        reply = await asyncio.wait_for(read_message(self._reader), self.timeout)
        if reply is not None and reply.type == "error" and reply.body.get("message") == "config mismatch":
            raise ConfigMismatchError()
        return expect(reply, *types)

    async def request(self, message: Message, *types: str) -> Message:
        await self.send(message)
        return await self.receive(*types)

    @property
    def prefix(self) -> str:
        return f"{self.label}{LABEL_SEPARATOR}"


def _failure(endpoint: ProviderEndpoint, exc: BaseException) -> str:
    reason = str(exc) or type(exc).__name__
    return f"provider {endpoint} unavailable: {reason}"


async def _gather(providers: Sequence[ProviderEndpoint], job) -> Tuple[list, List[str]]:
    """Run job(endpoint) for every provider; split successes from failures in provider order"""
    outcomes = await asyncio.gather(*(job(endpoint) for endpoint in providers), return_exceptions=True)
    successes, failures = [], []
    for endpoint, outcome in zip(providers, outcomes):
        if isinstance(outcome, (TexSeekError, OSError, asyncio.TimeoutError)):
            message = _failure(endpoint, outcome)
            logger.warning(message)
            failures.append(message)
        elif isinstance(outcome, BaseException):
            raise outcome
        else:
            successes.append(outcome)
    return successes, failures


def _check_labels(labels: Sequence[str]) -> None:
    seen = set()
    for label in labels:
        if label in seen:
            raise UsageError(f"archive label {label!r} used by more than one provider")
        seen.add(label)


async def _collect_records(endpoint: ProviderEndpoint, settings: Settings, timeout: float) -> Tuple[str, List[IndexRecord]]:
    async with ProviderSession(endpoint, settings, timeout) as session:
        await session.send(Message("index_request", {"cfg": session.cfg_hash}))
        records = []
        while True:
            message = await session.receive("feature_record", "index_done")
            if message.type == "index_done":
                break
            records.append(record_from_body(message.body, session.prefix))
        count = message.body.get("count")
        if count != len(records):
            raise ProtocolError(f"provider announced {count} records but sent {len(records)}")
        logger.info("collected %d records from %s", len(records), endpoint)
        return session.label, records


async def dispatch_index(
    providers: Sequence[ProviderEndpoint],
    settings: Settings = Settings(),
    timeout: Optional[float] = None,
) -> DispatchResult:
    """
    Have every provider index its archive and merge the records

    Args:
        providers: Provider endpoints
        settings: Settings whose config hash the providers must match
        timeout: Seconds allowed for connecting and for each reply

    Returns:
        DispatchResult with the merged index (ids prefixed "label/"), failures and per-label counts

    Raises:
        ProviderUnavailableError: No provider answered
    """
    _check_labels([endpoint.label for endpoint in providers if endpoint.label])
    collected, failures = await _gather(providers, lambda endpoint: _collect_records(endpoint, settings, timeout))
    if not collected:
        raise ProviderUnavailableError("all providers failed: " + "; ".join(failures))
    _check_labels([label for label, _ in collected])

    records = [record for _, batch in collected for record in batch]
    index = Index.from_records(records, settings)
    counts = {label: len(batch) for label, batch in collected}
    return DispatchResult(index=index, failures=failures, counts=counts)


async def _query_one(
    endpoint: ProviderEndpoint, features: FeatureVector, k: int, settings: Settings, timeout: float
) -> Tuple[str, List[RankedResult]]:
    async with ProviderSession(endpoint, settings, timeout) as session:
        body = {"cfg": session.cfg_hash, "k": k, **features_body(features)}
        reply = await session.request(Message("query_request", body), "query_result")
        return session.label, results_from_body(reply.body, session.prefix)


async def remote_query(
    providers: Sequence[ProviderEndpoint],
    q: FeatureVector,
    k: int,
    settings: Settings = Settings(),
    timeout: Optional[float] = None,
) -> QueryOutcome:
    """
    Fan a query out to providers and merge their top-k lists

    Args:
        providers: Provider endpoints
        q: Query features, normalized before sending
        k: Number of results
        settings: Settings whose config hash the providers must match
        timeout: Seconds allowed for connecting and for each reply

    Returns:
        QueryOutcome with the global top k by (distance, id) and any provider failures
    """
    _check_labels([endpoint.label for endpoint in providers if endpoint.label])
    features = normalize_rotation(q)
    answered, failures = await _gather(providers, lambda endpoint: _query_one(endpoint, features, k, settings, timeout))
    if not answered:
        raise ProviderUnavailableError("all providers failed: " + "; ".join(failures))
    _check_labels([label for label, _ in answered])

    merged = sorted(result for _, results in answered for result in results)
    return QueryOutcome(results=merged[:max(k, 0)], failures=failures)


async def fetch_image(
    providers: Sequence[ProviderEndpoint],
    image_id: str,
    settings: Settings = Settings(),
    timeout: Optional[float] = None,
) -> GrayImage:
    """
    Retrieve an image from the provider whose archive label prefixes its id

    Args:
        providers: Provider endpoints
        image_id: Merged-index id, "label/path"
        settings: Settings used for the hello exchange
        timeout: Seconds allowed for connecting and for each reply

    Returns:
        The image as served by the provider
    """
    label, sep, local_id = image_id.partition(LABEL_SEPARATOR)
    if not sep or not local_id:
        raise UsageError(f"image id must be label/path, got {image_id!r}")

    failures = []
    for endpoint in providers:
        if endpoint.label is not None and endpoint.label != label:
            continue
        try:
            async with ProviderSession(endpoint, settings, timeout) as session:
                if session.label != label:
                    continue
                reply = await session.request(Message("image_request", {"id": local_id}), "image_result")
        except (TexSeekError, OSError, asyncio.TimeoutError) as exc:
            failures.append(_failure(endpoint, exc))
            continue
        try:
            data = base64.b64decode(reply.body["pgm_b64"], validate=True)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed image_result from {endpoint}") from exc
        return read_pnm(data)

    detail = f": {'; '.join(failures)}" if failures else ""
    raise ProviderUnavailableError(f"no provider served archive {label!r}{detail}")
