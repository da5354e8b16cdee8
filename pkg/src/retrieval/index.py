"""
Feature index and its text file format

Line 1 is ``TEXSEEK-INDEX v1 M=<scales> N=<orientations> cfg=<hash>``; each
following line is ``id<TAB>f1 ... fD<TAB>dominant<TAB>attrs`` with reals at 9
significant digits and percent-encoded ids and attributes.
"""
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, Tuple
from urllib.parse import unquote

import numpy as np

from src.config import Settings, config_hash
from src.errors import GeometryError, IndexFormatError
from src.imaging.gabor import FeatureVector

INDEX_MAGIC = "TEXSEEK-INDEX"
INDEX_VERSION = "v1"

_HEADER = re.compile(r"^TEXSEEK-INDEX (\S+) M=(\d+) N=(\d+) cfg=([0-9a-f]+)$")
_ID_SPECIALS = "%\t\n\r"
_ATTR_SPECIALS = "%\t\n\r;="


def _quote(text: str, specials: str) -> str:
    return "".join(f"%{ord(ch):02X}" if ch in specials else ch for ch in text)


@dataclass(frozen=True, eq=False)
class IndexRecord:
    """
    One indexed image: rotation-normalized features rounded to 32-bit
    precision, so the index and an embedded payload hold the same values
    """
    id: str
    features: FeatureVector
    attributes: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.features.dominant_orientation != 0:
            raise IndexFormatError(f"record {self.id!r} holds features that are not rotation-normalized")
        object.__setattr__(self, "features", self.features.as_float32())
        object.__setattr__(self, "attributes", dict(self.attributes))

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndexRecord):
            return NotImplemented
        return (self.id, self.attributes) == (other.id, other.attributes) and self.features == other.features

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Index:
    scales: int
    orientations: int
    cfg_hash: str
    records: Tuple[IndexRecord, ...] = ()

    def __post_init__(self):
        records = tuple(sorted(self.records, key=lambda record: record.id))
        for previous, current in zip(records, records[1:]):
            if previous.id == current.id:
                raise IndexFormatError(f"duplicate id {current.id!r}")
        for record in records:
            if (record.features.scales, record.features.orientations) != (self.scales, self.orientations):
                raise IndexFormatError(
                    f"record {record.id!r} has a {record.features.scales}x{record.features.orientations} "
                    f"feature layout, index expects {self.scales}x{self.orientations}"
                )
        object.__setattr__(self, "records", records)

    @classmethod
    def from_records(cls, records: Iterable[IndexRecord], settings: Settings) -> "Index":
        bank = settings.bank
        return cls(scales=bank.scales, orientations=bank.orientations, cfg_hash=config_hash(settings), records=tuple(records))

    @property
    def dimensions(self) -> int:
        return 2 * self.scales * self.orientations

    @property
    def ids(self) -> Tuple[str, ...]:
        return tuple(record.id for record in self.records)

    def matrix(self) -> np.ndarray:
        """Feature values stacked as (records, dimensions)"""
        if not self.records:
            return np.zeros((0, self.dimensions))
        return np.stack([record.features.values for record in self.records])

    def get(self, record_id: str) -> IndexRecord:
        for record in self.records:
            if record.id == record_id:
                return record
        raise KeyError(record_id)

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Index):
            return NotImplemented
        return (
            (self.scales, self.orientations, self.cfg_hash) == (other.scales, other.orientations, other.cfg_hash)
            and self.records == other.records
        )

    __hash__ = None


def format_attributes(attributes: Dict[str, str]) -> str:
    return ";".join(
        f"{_quote(key, _ATTR_SPECIALS)}={_quote(value, _ATTR_SPECIALS)}" for key, value in attributes.items()
    )


def parse_attributes(text: str) -> Dict[str, str]:
    attributes: Dict[str, str] = {}
    if not text:
        return attributes
    for item in text.split(";"):
        key, sep, value = item.partition("=")
        if not sep:
            raise IndexFormatError(f"attribute without '=': {item!r}")
        attributes[unquote(key)] = unquote(value)
    return attributes


def save_index(index: Index) -> bytes:
    """
    Serialize an index to its UTF-8 text form

    Args:
        index: Index to write

    Returns:
        File bytes; identical indexes always give identical bytes
    """
    lines = [f"{INDEX_MAGIC} {INDEX_VERSION} M={index.scales} N={index.orientations} cfg={index.cfg_hash}"]
    for record in index.records:
        values = " ".join(format(float(value), ".9g") for value in record.features.values)
        lines.append(
            "\t".join([
                _quote(record.id, _ID_SPECIALS),
                values,
                str(record.features.dominant_orientation),
                format_attributes(record.attributes),
            ])
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_index(data: bytes) -> Index:
    """
    Parse an index file

    Args:
        data: File bytes written by save_index

    Returns:
        The Index

    Raises:
        IndexFormatError: Bad header or version, malformed line, duplicate id
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise IndexFormatError(f"index is not UTF-8: {exc}") from exc

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise IndexFormatError("empty index file")

    header = _HEADER.match(lines[0])
    if not header:
        raise IndexFormatError(f"malformed index header: {lines[0]!r}")
    version, scales, orientations, cfg = header.groups()
    if version != INDEX_VERSION:
        raise IndexFormatError(f"unsupported index version {version}, expected {INDEX_VERSION}")
    scales, orientations = int(scales), int(orientations)
    dims = 2 * scales * orientations

    records = []
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 4:
            raise IndexFormatError(f"line {number}: expected 4 tab-separated fields, got {len(parts)}")
        record_id, values, dominant, attrs = parts
        try:
            numbers = np.array([float(value) for value in values.split()], dtype=np.float64)
            dominant = int(dominant)
        except ValueError as exc:
            raise IndexFormatError(f"line {number}: {exc}") from exc
        if numbers.size != dims:
            raise IndexFormatError(f"line {number}: expected {dims} feature values, got {numbers.size}")
        try:
            features = FeatureVector(numbers, dominant, scales, orientations)
        except GeometryError as exc:
            raise IndexFormatError(f"line {number}: {exc}") from exc
        records.append(IndexRecord(id=unquote(record_id), features=features, attributes=parse_attributes(attrs)))

    return Index(scales=scales, orientations=orientations, cfg_hash=cfg, records=tuple(records))
