"""
Retrieval and fidelity evaluation

Precision/recall over ranked results, the payload-vs-PSNR sweep, and the
class-separation check used to validate a synthetic corpus.

Sweep payloads come from a 32-bit linear congruential generator so every
implementation draws the same bits for a seed:

    state <- (1664525 * state + 1013904223) mod 2**32, starting from the seed
    bit    = top bit (bit 31) of each new state
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set

import numpy as np

from src.config import Settings
from src.errors import EvaluationError
from src.imaging.image import GrayImage
from src.imaging.stego import baseline, capacity, embed, psnr
from src.retrieval.index import Index
from src.retrieval.search import RankedResult, distance, rank

logger = logging.getLogger(__name__)

LCG_MULTIPLIER = 1664525
LCG_INCREMENT = 1013904223
LCG_MODULUS = 2 ** 32


@dataclass(frozen=True)
class PRPoint:
    k: int
    precision: float
    recall: float


@dataclass(frozen=True)
class SweepRow:
    payload_bits: int
    psnr_baseline: Optional[float]
    psnr_cover: Optional[float]
    error: Optional[str] = None


def lcg_bits(seed: int, count: int) -> np.ndarray:
    """Draw count payload bits from the documented linear congruential generator"""
    state = seed % LCG_MODULUS
    bits = np.zeros(count, dtype=np.uint8)
    for position in range(count):
        state = (LCG_MULTIPLIER * state + LCG_INCREMENT) % LCG_MODULUS
        bits[position] = state >> 31
    return bits


def precision_recall(results: Sequence[RankedResult], relevant: Set[str]) -> List[PRPoint]:
    """
    Precision and recall at every rank cutoff

    Args:
        results: Ranked results
        relevant: Ids that count as relevant

    Returns:
        One PRPoint per k from 1 to len(results)
    """
    if not relevant:
        raise EvaluationError("relevant set must not be empty")
    points = []
    hits = 0
    for k, result in enumerate(results, start=1):
        hits += result.id in relevant
        points.append(PRPoint(k=k, precision=hits / k, recall=hits / len(relevant)))
    return points


def mean_precision_at(curves: Iterable[Sequence[PRPoint]], k: int) -> float:
    """
    Mean precision@k over several queries' curves

    Raises:
        EvaluationError: k < 1, no curves, or a curve shorter than k
    """
    if k < 1:
        raise EvaluationError(f"precision@k needs k >= 1, got {k}")
    curves = list(curves)
    if not curves:
        raise EvaluationError("no queries to average")
    depth = min(len(curve) for curve in curves)
    if depth < k:
        raise EvaluationError(f"precision@{k} needs {k} results per query, but queries return only {depth}")
    return float(np.mean([curve[k - 1].precision for curve in curves]))


def class_relevance(manifest: Mapping[str, str]) -> Dict[str, Set[str]]:
    """For every id, the other ids sharing its class"""
    members: Dict[str, Set[str]] = {}
    for image_id, label in manifest.items():
        members.setdefault(label, set()).add(image_id)
    return {image_id: members[label] - {image_id} for image_id, label in manifest.items()}


def evaluate_index(index: Index, manifest: Mapping[str, str]) -> Dict[str, List[PRPoint]]:
    """
    Use every indexed image as a query against the rest of the index

    Args:
        index: Index whose ids appear in the manifest
        manifest: id -> class label

    Returns:
        id -> precision/recall curve, the query itself excluded from its results
    """
    relevance = class_relevance(manifest)
    curves = {}
    for record in index.records:
        if record.id not in relevance:
            continue
        relevant = relevance[record.id]
        if not relevant:
            logger.warning("skipping %s: no other image shares its class", record.id)
            continue
        results = [result for result in rank(record.features, index, len(index)) if result.id != record.id]
        curves[record.id] = precision_recall(results, relevant)
    if not curves:
        raise EvaluationError("no index ids appear in the manifest")
    return curves


def mean_curve(curves: Mapping[str, Sequence[PRPoint]]) -> List[PRPoint]:
    """Average precision and recall per k over queries"""
    depth = min(len(curve) for curve in curves.values())
    return [
        PRPoint(
            k=k,
            precision=float(np.mean([curve[k - 1].precision for curve in curves.values()])),
            recall=float(np.mean([curve[k - 1].recall for curve in curves.values()])),
        )
        for k in range(1, depth + 1)
    ]


def format_pr(points: Sequence[PRPoint]) -> str:
    rows = ["k\tprecision\trecall"]
    rows.extend(f"{point.k}\t{point.precision:.6f}\t{point.recall:.6f}" for point in points)
    return "\n".join(rows) + "\n"


def separation_margin(index: Index, manifest: Mapping[str, str]) -> float:
    """Mean cross-class distance divided by mean same-class distance"""
    same, cross = [], []
    records = [record for record in index.records if record.id in manifest]
    for left, right in itertools.combinations(records, 2):
        value = distance(left.features, right.features)
        (same if manifest[left.id] == manifest[right.id] else cross).append(value)
    if not same or not cross:
        raise EvaluationError("need at least two classes with two images each")
    mean_same = float(np.mean(same))
    return math.inf if mean_same == 0 else float(np.mean(cross)) / mean_same


def psnr_sweep(
    cover: GrayImage,
    payload_sizes: Sequence[int],
    seed: int = 42,
    settings: Settings = Settings(),
) -> List[SweepRow]:
    """
    Embed seeded random payloads of several sizes and measure fidelity

    Args:
        cover: Cover image
        payload_sizes: Payload lengths in bits
        seed: LCG seed; each payload is a prefix of the same bit stream
        settings: Quantization and parity settings

    Returns:
        One row per size with PSNR against the re-encoded baseline and the raw cover,
        or an error row when the size exceeds capacity
    """
    available = capacity(cover)
    reference = baseline(cover, settings.quant_table)
    stream = lcg_bits(seed, max([size for size in payload_sizes if 0 <= size <= available], default=0))

    rows = []
    for size in payload_sizes:
        if size < 0 or size > available:
            reason = f"payload of {size} bits exceeds capacity of {available} bits"
            logger.warning(reason)
            rows.append(SweepRow(size, None, None, reason))
            continue
        stego = embed(cover, stream[:size], settings.quant_table, settings.parity_dc)
        rows.append(SweepRow(size, psnr(reference, stego), psnr(cover, stego)))
    return rows


def _db(value: Optional[float]) -> str:
    if value is None:
        return "-"
    return "inf" if math.isinf(value) else f"{value:.4f}"


def format_sweep(rows: Sequence[SweepRow]) -> str:
    lines = ["bits\tpsnr_baseline\tpsnr_cover\tnote"]
    lines.extend(
        f"{row.payload_bits}\t{_db(row.psnr_baseline)}\t{_db(row.psnr_cover)}\t{row.error or ''}" for row in rows
    )
    return "\n".join(lines) + "\n"
