"""
Gabor texture features

A self-similar bank of M scales by N orientations (a dyadic-style Gabor
wavelet family) is applied to the image; the mean and standard deviation of every
response magnitude form the feature vector, and a circular shift over
orientations makes it rotation invariant.
"""
import functools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple

import numpy as np
from scipy import fft

from src.errors import ConfigError, CorpusError, GeometryError
from src.imaging.image import GrayImage

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BankConfig:
    """Filter bank parameters; frequencies are in cycles per pixel"""
    scales: int = 5
    orientations: int = 6
    freq_low: float = 0.05
    freq_high: float = 0.4
    kernel_radius: int = 15

    def __post_init__(self):
        if self.scales < 2:
            raise ConfigError(f"scales must be at least 2, got {self.scales}")
        if self.orientations < 2:
            raise ConfigError(f"orientations must be at least 2, got {self.orientations}")
        if not 0 < self.freq_low < self.freq_high < 0.5:
            raise ConfigError(
                f"need 0 < freq_low < freq_high < 0.5, got {self.freq_low} and {self.freq_high}"
            )
        if self.kernel_radius < 1:
            raise ConfigError(f"kernel_radius must be positive, got {self.kernel_radius}")

    @property
    def scale_factor(self) -> float:
        return (self.freq_high / self.freq_low) ** (1.0 / (self.scales - 1))

    @property
    def dimensions(self) -> int:
        return 2 * self.scales * self.orientations

    @property
    def support(self) -> int:
        return 2 * self.kernel_radius + 1


@dataclass(frozen=True, eq=False)
class GaborKernel:
    taps: np.ndarray
    scale: int
    orientation: int
    frequency: float
    angle: float


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """
    Interleaved (mu, sigma) pairs, orientation varying fastest, plus the
    dominant orientation index
    """
    values: np.ndarray
    dominant_orientation: int
    scales: int = 5
    orientations: int = 6

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size != 2 * self.scales * self.orientations:
            raise GeometryError(
                f"feature vector needs {2 * self.scales * self.orientations} values, got {values.size}"
            )
        if not 0 <= self.dominant_orientation < self.orientations:
            raise GeometryError(f"dominant orientation {self.dominant_orientation} out of range")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def pairs(self) -> np.ndarray:
        """The (mu, sigma) pairs shaped (scales, orientations, 2)"""
        return self.values.reshape(self.scales, self.orientations, 2)

    @property
    def means(self) -> np.ndarray:
        return self.pairs[..., 0]

    @property
    def stds(self) -> np.ndarray:
        return self.pairs[..., 1]

    def as_float32(self) -> "FeatureVector":
        """Round every component to the nearest 32-bit float"""
        return FeatureVector(
            values=self.values.astype(np.float32).astype(np.float64),
            dominant_orientation=self.dominant_orientation,
            scales=self.scales,
            orientations=self.orientations,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (
            self.dominant_orientation == other.dominant_orientation
            and (self.scales, self.orientations) == (other.scales, other.orientations)
            and bool(np.array_equal(self.values, other.values))
        )

    __hash__ = None


def _kernel(cfg: BankConfig, m: int, n: int) -> GaborKernel:
    a = cfg.scale_factor
    uh = cfg.freq_high
    ln2 = math.log(2.0)

    # Envelope widths at the top scale, chosen so neighbouring filters meet at half peak
    sigma_u = ((a - 1.0) * uh) / ((a + 1.0) * math.sqrt(2.0 * ln2))
    sigma_v = (
        math.tan(math.pi / (2.0 * cfg.orientations))
        * (uh - 2.0 * ln2 * sigma_u ** 2 / uh)
        / math.sqrt(2.0 * ln2 - (2.0 * ln2) ** 2 * sigma_u ** 2 / uh ** 2)
    )
    sigma_x = 1.0 / (2.0 * math.pi * sigma_u)
    sigma_y = 1.0 / (2.0 * math.pi * sigma_v)

    dilation = a ** (cfg.scales - 1 - m)
    theta = n * math.pi / cfg.orientations
    r = cfg.kernel_radius
    ys, xs = np.mgrid[-r:r + 1, -r:r + 1].astype(np.float64)
    x_rot = (xs * math.cos(theta) + ys * math.sin(theta)) / dilation
    y_rot = (-xs * math.sin(theta) + ys * math.cos(theta)) / dilation

    envelope = np.exp(-0.5 * (x_rot ** 2 / sigma_x ** 2 + y_rot ** 2 / sigma_y ** 2))
    envelope /= 2.0 * math.pi * sigma_x * sigma_y * dilation
    taps = envelope * np.exp(2j * math.pi * uh * x_rot)
    taps -= taps.mean()
    taps.setflags(write=False)

    return GaborKernel(taps=taps, scale=m, orientation=n, frequency=uh / dilation, angle=theta)


@functools.lru_cache(maxsize=8)
def build_bank(cfg: BankConfig) -> Tuple[Tuple[GaborKernel, ...], ...]:
    """
    Build the self-similar Gabor filter bank

    Args:
        cfg: Bank parameters

    Returns:
        scales x orientations kernels; kernel (m, n) has center frequency
        freq_high * a**(m - (scales - 1)) along angle n * pi / orientations
    """
    logger.debug("building %dx%d Gabor bank, scale factor %.5f", cfg.scales, cfg.orientations, cfg.scale_factor)
    return tuple(
        tuple(_kernel(cfg, m, n) for n in range(cfg.orientations))
        for m in range(cfg.scales)
    )


def _responses(pixels: np.ndarray, kernels: Sequence[GaborKernel], radius: int) -> Iterator[np.ndarray]:
    """Yield |image * kernel| for each kernel, sharing one spectrum of the reflected image"""
    height, width = pixels.shape
    padded = np.pad(pixels.astype(np.float64), radius, mode="symmetric")
    shape = (fft.next_fast_len(height + 4 * radius), fft.next_fast_len(width + 4 * radius))
    spectrum = fft.fft2(padded, s=shape)
    lo = 2 * radius
    for kernel in kernels:
        full = fft.ifft2(spectrum * fft.fft2(kernel.taps, s=shape))
        yield np.abs(full[lo:lo + height, lo:lo + width])


def filter_magnitude(img: GrayImage, kernel: GaborKernel) -> np.ndarray:
    """
    Convolve with one kernel under symmetric reflection and take the modulus

    Args:
        img: Input image
        kernel: Gabor kernel

    Returns:
        Non-negative response magnitudes with the image's shape
    """
    radius = kernel.taps.shape[0] // 2
    return next(_responses(img.pixels, [kernel], radius))


def energy_map(magnitudes: Sequence[Sequence[np.ndarray]]) -> np.ndarray:
    """
    Sum each response magnitude over the whole image

    Args:
        magnitudes: scales x orientations magnitude arrays of equal shape

    Returns:
        The (scales, orientations) energy array E(m, n)
    """
    shapes = {np.shape(mag) for row in magnitudes for mag in row}
    if len(shapes) > 1:
        raise GeometryError(f"magnitudes have differing shapes: {sorted(shapes)}")
    return np.array([[float(np.sum(mag)) for mag in row] for row in magnitudes], dtype=np.float64)


def feature_vector(img: GrayImage, cfg: BankConfig = BankConfig()) -> FeatureVector:
    """
    Compute the texture feature vector of an image

    Args:
        img: Image at least 2 * kernel_radius + 1 pixels in each dimension
        cfg: Bank parameters

    Returns:
        Un-normalized FeatureVector with the dominant orientation set
    """
    if img.width < cfg.support or img.height < cfg.support:
        raise CorpusError(
            f"image {img.width}x{img.height} is smaller than the {cfg.support}x{cfg.support} filter support"
        )

    bank = build_bank(cfg)
    kernels = [kernel for row in bank for kernel in row]
    area = float(img.width * img.height)

    energies = np.zeros((cfg.scales, cfg.orientations))
    pairs = np.zeros((cfg.scales, cfg.orientations, 2))
    for kernel, mag in zip(kernels, _responses(img.pixels, kernels, cfg.kernel_radius)):
        energy = float(np.sum(mag))
        mu = energy / area
        energies[kernel.scale, kernel.orientation] = energy
        pairs[kernel.scale, kernel.orientation] = (mu, math.sqrt(float(np.sum((mag - mu) ** 2)) / area))

    dominant = int(np.argmax(energies.sum(axis=0)))
    return FeatureVector(
        values=pairs.reshape(-1),
        dominant_orientation=dominant,
        scales=cfg.scales,
        orientations=cfg.orientations,
    )


def normalize_rotation(features: FeatureVector) -> FeatureVector:
    """
    Circularly shift every scale's orientation pairs so the dominant one comes first

    Args:
        features: Feature vector with any dominant orientation

    Returns:
        The shifted vector, whose dominant orientation is 0
    """
    shifted = np.roll(features.pairs, -features.dominant_orientation, axis=1)
    return FeatureVector(
        values=shifted.reshape(-1),
        dominant_orientation=0,
        scales=features.scales,
        orientations=features.orientations,
    )
