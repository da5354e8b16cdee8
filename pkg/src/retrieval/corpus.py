"""
Synthetic texture corpus with class ground truth

Each class is a sinusoidal grating with its own orientation and spatial
frequency. Instances get a random phase, up to 5 degrees of orientation
jitter and uniform noise at 10% of the grating amplitude.
"""
import logging
import math
import pathlib
from typing import Dict, List, Tuple, Union

import numpy as np

from src.errors import UsageError
from src.imaging.image import GrayImage, save_image

logger = logging.getLogger(__name__)

MAX_CLASSES = 8
MIN_SIZE = 64
AMPLITUDE = 100.0
NOISE = 0.1 * AMPLITUDE
JITTER_DEGREES = 5.0
MANIFEST_NAME = "manifest.tsv"

# (orientation in degrees, cycles per pixel). Frequencies are distinct so
# classes stay apart once orientation is normalized away.
CLASS_TABLE: Tuple[Tuple[float, float], ...] = (
    (0.0, 0.08),
    (60.0, 0.24),
    (120.0, 0.14),
    (30.0, 0.055),
    (90.0, 0.34),
    (150.0, 0.11),
    (0.0, 0.19),
    (90.0, 0.065),
)


def grating(size: int, angle_degrees: float, frequency: float, phase: float = 0.0) -> np.ndarray:
    """Float grating 128 + A cos(2 pi f (x cos t + y sin t) + phase) on a size x size grid"""
    theta = math.radians(angle_degrees)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    return 128.0 + AMPLITUDE * np.cos(2.0 * math.pi * frequency * (xs * math.cos(theta) + ys * math.sin(theta)) + phase)


def texture(rng: np.random.Generator, size: int, class_index: int) -> GrayImage:
    """One noisy, jittered instance of a class"""
    angle, frequency = CLASS_TABLE[class_index]
    angle += rng.uniform(-JITTER_DEGREES, JITTER_DEGREES)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    pixels = grating(size, angle, frequency, phase) + rng.uniform(-NOISE, NOISE, size=(size, size))
    return GrayImage.from_array(pixels)


def gen_corpus(
    out_dir: Union[str, pathlib.Path],
    classes: int = 4,
    per_class: int = 16,
    size: int = 256,
    seed: int = 42,
) -> List[Tuple[str, str]]:
    """
    Write a labeled corpus of grating textures

    Args:
        out_dir: Destination directory, created if missing
        classes: Number of classes, at most 8
        per_class: Images per class
        size: Image side in pixels, at least 64
        seed: Random seed; the same seed gives a byte-identical corpus

    Returns:
        Manifest rows (id, class), also written to manifest.tsv
    """
    if not 1 <= classes <= MAX_CLASSES:
        raise UsageError(f"classes must be between 1 and {MAX_CLASSES}, got {classes}")
    if size < MIN_SIZE:
        raise UsageError(f"size must be at least {MIN_SIZE}, got {size}")
    if per_class < 1:
        raise UsageError(f"per_class must be positive, got {per_class}")

    root = pathlib.Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    manifest = []
    for class_index in range(classes):
        label = f"c{class_index}"
        for instance in range(per_class):
            image_id = f"{label}_{instance:02d}.pgm"
            save_image(texture(rng, size, class_index), root / image_id)
            manifest.append((image_id, label))

    (root / MANIFEST_NAME).write_text("".join(f"{image_id}\t{label}\n" for image_id, label in manifest), encoding="utf-8")
    logger.info("wrote %d images in %d classes to %s", len(manifest), classes, root)
    return manifest


def load_manifest(path: Union[str, pathlib.Path]) -> Dict[str, str]:
    """Read id<TAB>class lines into a dict"""
    manifest = {}
    for number, line in enumerate(pathlib.Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        image_id, sep, label = line.partition("\t")
        if not sep:
            raise UsageError(f"manifest line {number} is not id<TAB>class: {line!r}")
        manifest[image_id] = label.strip()
    return manifest
