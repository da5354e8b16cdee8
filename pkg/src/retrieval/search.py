"""
Query-by-example retrieval

Covers both phases of the system: attribute generation and embedding over a
corpus (build_index), and ranking a query against an index, either from
freshly computed features or from the features embedded in a stego image.
"""
import logging
import pathlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from src.config import Settings, config_hash
from src.errors import (
    CapacityError,
    CorpusError,
    GeometryError,
    ImageFormatError,
    NoEmbeddedAttributesError,
    PayloadError,
    ShortReadError,
    UnembeddableBlockError,
)
from src.imaging.gabor import FeatureVector, feature_vector, normalize_rotation
from src.imaging.image import GrayImage, load_image, save_image
from src.imaging.stego import StegoPayload, embed_payload, read_payload
from src.retrieval.index import Index, IndexRecord

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".pgm", ".ppm", ".pnm")
STEGO_SUFFIX = ".stego.pgm"


@dataclass(frozen=True, order=True)
class RankedResult:
    distance: float
    id: str


@dataclass
class BuildResult:
    index: Index
    warnings: List[str] = field(default_factory=list)
    unembedded: List[str] = field(default_factory=list)
    stego_paths: Dict[str, pathlib.Path] = field(default_factory=dict)


def _cell_distances(query: np.ndarray, targets: np.ndarray, cells: int) -> np.ndarray:
    """Sum over (m, n) cells of the Euclidean (mu, sigma) gap, one value per target row"""
    diff = targets.reshape(len(targets), cells, 2) - query.reshape(1, cells, 2)
    return np.sqrt((diff * diff).sum(axis=2)).sum(axis=1)


def distance(q: FeatureVector, t: FeatureVector) -> float:
    """
    Texture distance D(Q, T) between two feature vectors

    Args:
        q: Query features
        t: Target features with the same layout

    Returns:
        Sum over all (m, n) of sqrt((mu_q - mu_t)^2 + (sigma_q - sigma_t)^2)
    """
    if q.values.size != t.values.size:
        raise GeometryError(f"feature dimensions differ: {q.values.size} vs {t.values.size}")
    return float(_cell_distances(q.values, t.values[np.newaxis], q.values.size // 2)[0])


def component_scale(index: Index) -> np.ndarray:
    """Per-component population standard deviation over the index, zeros replaced by 1"""
    matrix = index.matrix()
    if not len(matrix):
        return np.ones(index.dimensions)
    scale = matrix.std(axis=0)
    scale[scale == 0] = 1.0
    return scale


def rank(q: FeatureVector, index: Index, k: int, scale: Optional[np.ndarray] = None) -> List[RankedResult]:
    """
    Rank index records by ascending distance to the query

    Args:
        q: Query features; normalized here if its dominant orientation is not 0
        index: Index to search
        k: Number of results; 0 gives an empty list, more than the index size gives all
        scale: Optional per-component divisors for standardized distances

    Returns:
        Up to k results sorted by (distance, id)
    """
    if k <= 0 or not index.records:
        return []
    if q.values.size != index.dimensions:
        raise GeometryError(f"query has {q.values.size} features, index expects {index.dimensions}")

    query = normalize_rotation(q).values
    targets = index.matrix()
    if scale is not None:
        query = query / scale
        targets = targets / scale
    distances = _cell_distances(query, targets, index.dimensions // 2)
    ordered = sorted(RankedResult(float(value), record.id) for value, record in zip(distances, index.records))
    return ordered[:k]


def index_features(img: GrayImage, settings: Settings) -> FeatureVector:
    """Rotation-normalized features as they are stored in an index"""
    return normalize_rotation(feature_vector(img, settings.bank)).as_float32()


def list_corpus(corpus_dir: Union[str, pathlib.Path]) -> List[pathlib.Path]:
    """Netpbm files under a directory, recursively, excluding generated stego images"""
    root = pathlib.Path(corpus_dir)
    if not root.is_dir():
        raise CorpusError(f"corpus directory not found: {root}")
    return sorted(
        path for path in root.rglob("*")
        if path.is_file()
        and path.suffix.lower() in IMAGE_SUFFIXES
        and not path.name.lower().endswith(STEGO_SUFFIX)
    )


def _stego_path(stego_dir: pathlib.Path, record_id: str) -> pathlib.Path:
    relative = pathlib.PurePosixPath(record_id)
    return stego_dir.joinpath(*relative.parent.parts, relative.stem + STEGO_SUFFIX)


def build_index(
    corpus_dir: Union[str, pathlib.Path],
    settings: Settings = Settings(),
    embed_attributes: bool = False,
    stego_dir: Optional[Union[str, pathlib.Path]] = None,
    workers: Optional[int] = None,
) -> BuildResult:
    """
    Compute features for every image in a corpus and optionally embed them

    Args:
        corpus_dir: Directory of PGM/PPM files; ids are paths relative to it
        settings: Bank, quantization table and parity settings
        embed_attributes: Also hide each record in its image as <name>.stego.pgm
        stego_dir: Where stego images go; defaults to the corpus directory
        workers: Thread count for per-image work

    Returns:
        BuildResult with the index, warnings for skipped files, and unembedded ids

    Raises:
        CorpusError: No readable images in the corpus
    """
    root = pathlib.Path(corpus_dir)
    paths = list_corpus(root)
    if not paths:
        raise CorpusError(f"no PGM/PPM images found in {root}")
    out_dir = pathlib.Path(stego_dir) if stego_dir else root

    def process(path: pathlib.Path):
        record_id = path.relative_to(root).as_posix()
        try:
            img = load_image(path)
            features = index_features(img, settings)
        except (ImageFormatError, CorpusError, OSError) as exc:
            return record_id, None, f"skipped {record_id}: {exc}", None

        size = f"{img.width}x{img.height}"
        attributes = {"size": size}
        warning = None
        stego_path = None
        if embed_attributes:
            payload = StegoPayload(features=features, attributes={"id": record_id, "size": size})
            try:
                stego = embed_payload(img, payload, settings.quant_table, settings.parity_dc)
                stego_path = _stego_path(out_dir, record_id)
                stego_path.parent.mkdir(parents=True, exist_ok=True)
                save_image(stego, stego_path)
            except (CapacityError, UnembeddableBlockError) as exc:
                attributes["embedded"] = "no"
                warning = f"indexed {record_id} without embedding: {exc}"
        return record_id, IndexRecord(record_id, features, attributes), warning, stego_path

    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(process, paths))

    result = BuildResult(index=Index.from_records([], settings))
    records = []
    for record_id, record, warning, stego_path in outcomes:
        if warning:
            logger.warning(warning)
            result.warnings.append(warning)
        if record is None:
            continue
        records.append(record)
        if record.attributes.get("embedded") == "no":
            result.unembedded.append(record_id)
        if stego_path is not None:
            result.stego_paths[record_id] = stego_path

    if not records:
        raise CorpusError(f"no readable images in {root}")
    result.index = Index.from_records(records, settings)
    logger.info("indexed %d images from %s", len(records), root)
    return result


def check_settings(index: Index, settings: Settings) -> None:
    """Warn when an index was built under different settings than the query side"""
    expected = config_hash(settings)
    if index.cfg_hash != expected:
        logger.warning("index cfg=%s differs from current settings cfg=%s", index.cfg_hash, expected)


def query_from_image(img: GrayImage, index: Index, k: int, settings: Settings = Settings()) -> List[RankedResult]:
    """
    Rank the index against features computed from a query image

    Args:
        img: Query image
        index: Index to search
        k: Number of results
        settings: Bank settings; must match the index

    Returns:
        Ranked results
    """
    check_settings(index, settings)
    features = normalize_rotation(feature_vector(img, settings.bank))
    scale = component_scale(index) if settings.standardize else None
    return rank(features, index, k, scale)


def query_from_stego(stego: GrayImage, index: Index, k: int, settings: Settings = Settings()) -> List[RankedResult]:
    """
    Rank the index against the features embedded in a stego image

    Args:
        stego: Image carrying a payload
        index: Index to search
        k: Number of results
        settings: Quantization and parity settings used for embedding

    Returns:
        Ranked results

    Raises:
        NoEmbeddedAttributesError: The image carries no valid payload
    """
    check_settings(index, settings)
    try:
        payload = read_payload(
            stego,
            feature_dims=index.dimensions,
            orientations=index.orientations,
            table=settings.quant_table,
            parity_dc=settings.parity_dc,
        )
    except NoEmbeddedAttributesError:
        raise
    except (PayloadError, ShortReadError) as exc:
        raise NoEmbeddedAttributesError(f"no embedded attributes ({exc})") from exc
    scale = component_scale(index) if settings.standardize else None
    return rank(payload.features, index, k, scale)


def format_results(results: Sequence[RankedResult]) -> str:
    """Result lines rank<TAB>distance<TAB>id with distances at 9 significant digits"""
    return "".join(f"{position}\t{result.distance:.9g}\t{result.id}\n" for position, result in enumerate(results, start=1))
