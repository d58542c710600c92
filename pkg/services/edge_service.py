"""Gaussian smoothing and Canny edge detection."""

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import ndimage

from utils.errors import BadThresholds, ImageTooSmall, NonPositiveSigma
from utils.image_utils import GrayImage, as_raster

logger = logging.getLogger(__name__)

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T

# Unit steps (dx, dy) for the 8 quantized gradient sectors, sector k covering k * 45 degrees
SECTOR_STEPS = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]

Raster = Union[GrayImage, np.ndarray]


@dataclass(frozen=True, eq=False)
class GradientField:
    gx: np.ndarray
    gy: np.ndarray
    magnitude: np.ndarray
    direction: np.ndarray


@dataclass(frozen=True, eq=False)
class EdgeMap:
    """Boolean edge raster, shape (height, width)."""

    on: np.ndarray

    @property
    def width(self) -> int:
        return self.on.shape[1]

    @property
    def height(self) -> int:
        return self.on.shape[0]

    @property
    def count(self) -> int:
        return int(self.on.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, EdgeMap) and np.array_equal(self.on, other.on)


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian with radius ceil(3 sigma)."""
    if sigma <= 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    radius = int(math.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1, dtype=float)
    weights = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return weights / weights.sum()


def gaussian_blur(image: Raster, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with replicate borders; returns a real raster."""
    weights = gaussian_kernel_1d(sigma)
    raster = as_raster(image)
    blurred = ndimage.correlate1d(raster, weights, axis=0, mode="nearest")
    return ndimage.correlate1d(blurred, weights, axis=1, mode="nearest")


def sobel(image: Raster) -> GradientField:
    """
    Sobel gradients of a real raster.

    Args:
        image: Raster of at least 3x3 pixels

    Returns:
        GradientField with direction = atan2(gy, gx) in (-pi, pi]
    """
    raster = as_raster(image)
    if raster.shape[0] < 3 or raster.shape[1] < 3:
        raise ImageTooSmall(f"Sobel needs at least 3x3 pixels, got {raster.shape[1]}x{raster.shape[0]}")

    gx = ndimage.correlate(raster, SOBEL_X, mode="nearest")
    gy = ndimage.correlate(raster, SOBEL_Y, mode="nearest")
    direction = np.arctan2(gy, gx)
    direction[direction == -np.pi] = np.pi

    return GradientField(gx=gx, gy=gy, magnitude=np.hypot(gx, gy), direction=direction)


def non_maximum_suppression(gradient: GradientField) -> np.ndarray:
    """
    Thin gradient ridges along the quantized gradient direction.

    A pixel survives iff its magnitude is positive, strictly above the
    neighbour behind it and not below the neighbour ahead of it.
    """
    magnitude = gradient.magnitude
    height, width = magnitude.shape
    padded = np.pad(magnitude, 1, mode="constant")
    sector = np.mod(np.round(gradient.direction / (np.pi / 4)).astype(int), 8)

    keep = np.zeros_like(magnitude, dtype=bool)
    for index, (dx, dy) in enumerate(SECTOR_STEPS):
        mask = sector == index
        if not mask.any():
            continue
        ahead = padded[1 + dy:1 + dy + height, 1 + dx:1 + dx + width]
        behind = padded[1 - dy:1 - dy + height, 1 - dx:1 - dx + width]
        keep |= mask & (magnitude > behind) & (magnitude >= ahead)

    return keep & (magnitude > 0)


def hysteresis(candidates: np.ndarray, magnitude: np.ndarray, low: float, high: float) -> np.ndarray:
    """Keep strong pixels and the weak pixels 8-connected to them, flooded to a fixpoint."""
    strong = candidates & (magnitude >= high)
    weak = candidates & (magnitude >= low) & ~strong
    edges = strong.copy()
    height, width = edges.shape

    queue = deque(zip(*np.nonzero(strong)))
    while queue:
        y, x = queue.popleft()
        for ny in range(max(0, y - 1), min(height, y + 2)):
            for nx in range(max(0, x - 1), min(width, x + 2)):
                if weak[ny, nx] and not edges[ny, nx]:
                    edges[ny, nx] = True
                    queue.append((ny, nx))

    return edges


def _canny_from_gradient(gradient: GradientField, low: float, high: float) -> EdgeMap:
    candidates = non_maximum_suppression(gradient)
    return EdgeMap(hysteresis(candidates, gradient.magnitude, low, high))


def canny(image: Raster, sigma: float, low: float, high: float) -> EdgeMap:
    """
    Canny edge detector: blur, Sobel, non-maximum suppression, hysteresis.

    Args:
        image: Intensity image or real raster
        sigma: Gaussian smoothing scale
        low: Weak threshold on gradient magnitude
        high: Strong threshold on gradient magnitude

    Returns:
        EdgeMap with the source dimensions
    """
    if not 0 <= low < high:
        raise BadThresholds(f"Need 0 <= low < high, got low={low}, high={high}")

    gradient = sobel(gaussian_blur(image, sigma))
    return _canny_from_gradient(gradient, low, high)


def canny_relative(image: Raster, sigma: float, low_fraction: float, high_fraction: float) -> EdgeMap:
    """Canny with thresholds given as fractions of the maximum gradient magnitude."""
    if not 0 <= low_fraction < high_fraction:
        raise BadThresholds(f"Need 0 <= low < high, got {low_fraction}, {high_fraction}")

    gradient = sobel(gaussian_blur(image, sigma))
    peak = float(gradient.magnitude.max())
    if peak <= 0:
        return EdgeMap(np.zeros(gradient.magnitude.shape, dtype=bool))

    edges = _canny_from_gradient(gradient, low_fraction * peak, high_fraction * peak)
    logger.debug(f"Canny kept {edges.count} edge pixels (peak gradient {peak:.1f})")
    return edges


def edges_to_image(edges: EdgeMap) -> GrayImage:
    """Render an edge map as on=255, off=0."""
    return GrayImage(edges.on.astype(np.uint8) * 255)
