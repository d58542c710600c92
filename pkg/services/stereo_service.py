"""Block-matching disparity estimation and metric depth from disparity."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import matplotlib
import numpy as np
import pandas as pd
from scipy import ndimage

from utils.errors import BadWindow, DimensionMismatch, InvalidConfig, ZeroDisparity
from utils.image_utils import GrayImage, RgbImage, save_pnm

logger = logging.getLogger(__name__)

INVALID = -1
_COST_INF = np.iinfo(np.int64).max


@dataclass(frozen=True)
class StereoRig:
    """Rectified stereo pair: focal length f in pixels, half baseline l in meters (T = 2l)."""

    focal: float
    half_baseline: float

    def __post_init__(self):
        if self.focal <= 0 or self.half_baseline <= 0:
            raise ValueError("StereoRig needs focal > 0 and half_baseline > 0")

    @property
    def baseline(self) -> float:
        return 2 * self.half_baseline

    def disparity_at_depth(self, depth: float) -> float:
        """Forward model d = 2 f l / z."""
        return 2 * self.focal * self.half_baseline / depth


@dataclass(frozen=True, eq=False)
class DisparityMap:
    """Left-referenced integer disparities with INVALID marking unmatched pixels."""

    d: np.ndarray
    omega: int
    window: int

    @property
    def width(self) -> int:
        return self.d.shape[1]

    @property
    def height(self) -> int:
        return self.d.shape[0]

    @property
    def valid(self) -> np.ndarray:
        return self.d != INVALID

    def value_at(self, x: int, y: int) -> Optional[float]:
        value = int(self.d[y, x])
        return None if value == INVALID else float(value)


def effective_window(window: int) -> int:
    """Even window sizes are rounded up to the next odd size."""
    if window < 1:
        raise BadWindow(f"Window size must be positive, got {window}")
    window = window + 1 if window % 2 == 0 else window
    if window < 3:
        raise BadWindow(f"Window size must be at least 3, got {window}")
    return window


def _box_sums(values: np.ndarray, size: int) -> np.ndarray:
    """Exact sums over every size x size window fully inside the raster."""
    height, width = values.shape
    integral = np.zeros((height + 1, width + 1), dtype=np.int64)
    integral[1:, 1:] = values.cumsum(axis=0).cumsum(axis=1)
    return (
        integral[size:, size:] - integral[:-size, size:]
        - integral[size:, :-size] + integral[:-size, :-size]
    )


def _sad_costs(left: np.ndarray, right: np.ndarray, delta: int, size: int) -> np.ndarray:
    """SAD cost of matching each left window with the right window shifted left by delta."""
    height, width = left.shape
    half = size // 2
    diff = np.zeros((height, width), dtype=np.int64)
    diff[:, delta:] = np.abs(left[:, delta:] - right[:, :width - delta])

    costs = np.full((height, width), _COST_INF, dtype=np.int64)
    costs[half:height - half, half:width - half] = _box_sums(diff, size)
    costs[:, :delta + half] = _COST_INF
    return costs


def block_match(left: GrayImage, right: GrayImage, window: int, omega: int,
                uniqueness: float = 0.95) -> DisparityMap:
    """
    Left-referenced SAD block matching over a rectified pair.

    For each left pixel whose window fits in both images for every shift in
    [0, omega], d is the shift minimizing SAD against the right window moved d pixels towards x = 0;
    ties go to the smaller shift. A match is rejected when its cost is not
    clearly below the best cost at shifts more than one pixel away
    (best >= uniqueness * second best).

    Args:
        left: Left image (reference)
        right: Right image
        window: Block size (even sizes rounded up to odd)
        omega: Maximum disparity searched
        uniqueness: Ratio of the uniqueness check

    Returns:
        DisparityMap with the left image's dimensions
    """
    if left.data.shape != right.data.shape:
        raise DimensionMismatch(
            f"Left {left.width}x{left.height} and right {right.width}x{right.height} differ"
        )
    size = effective_window(window)
    if omega < 1:
        raise InvalidConfig(f"omega must be >= 1, got {omega}")
    if size > min(left.width, left.height):
        raise BadWindow(f"Window {size} larger than the image")

    lhs = left.data.astype(np.int64)
    rhs = right.data.astype(np.int64)
    height, width = lhs.shape
    shifts = range(0, min(omega, width - 1) + 1)

    best = np.full((height, width), _COST_INF, dtype=np.int64)
    best_shift = np.zeros((height, width), dtype=np.int16)
    for delta in shifts:
        costs = _sad_costs(lhs, rhs, delta, size)
        better = costs < best
        best[better] = costs[better]
        best_shift[better] = delta

    second = np.full((height, width), _COST_INF, dtype=np.int64)
    for delta in shifts:
        costs = _sad_costs(lhs, rhs, delta, size)
        far = np.abs(best_shift.astype(int) - delta) > 1
        np.minimum(second, np.where(far, costs, _COST_INF), out=second)

    # Full support means every shift in [0, omega] has a right window in the image
    matched = best != _COST_INF
    matched[:, :min(width, shifts[-1] + size // 2)] = False
    ambiguous = (second != _COST_INF) & (best.astype(float) >= uniqueness * second.astype(float))
    valid = matched & ~ambiguous

    d = np.where(valid, best_shift, INVALID).astype(np.int16)
    disparity = DisparityMap(d=d, omega=omega, window=size)
    logger.info(
        f"Block matching {width}x{height}, window {size}, omega {omega}: "
        f"{valid_fraction(disparity):.1%} valid"
    )
    return disparity


def depth_from_disparity(d: float, rig: StereoRig) -> float:
    """Depth z_p = 2 f l / d in meters."""
    if d <= 0:
        raise ZeroDisparity(f"Disparity {d} has no finite depth")
    return 2 * rig.focal * rig.half_baseline / d


def valid_fraction(disparity: DisparityMap) -> float:
    return float(disparity.valid.mean())


def colormap_table() -> np.ndarray:
    """Fixed 256-entry RGB table sampled from the 'jet' colormap."""
    samples = matplotlib.colormaps["jet"](np.linspace(0.0, 1.0, 256))[:, :3]
    return np.floor(samples * 255 + 0.5).astype(np.uint8)


def disparity_levels(disparity: DisparityMap) -> np.ndarray:
    """Linear quantization round(d / omega * 255), clamped; invalid pixels map to 0."""
    scaled = np.floor(disparity.d.astype(float) / disparity.omega * 255 + 0.5)
    return np.where(disparity.valid, np.clip(scaled, 0, 255), 0).astype(np.uint8)


def disparity_to_color(disparity: DisparityMap) -> RgbImage:
    """Colorize disparities over [0, omega]; invalid pixels are black."""
    colors = colormap_table()[disparity_levels(disparity)]
    colors[~disparity.valid] = 0
    return RgbImage(colors)


def disparity_raster(disparity: DisparityMap, median_size: int = 5) -> np.ndarray:
    """
    Dense real raster for corner and edge detection on the disparity map.

    Invalid pixels take the smaller of the nearest valid disparities to their
    left and right (occluded pixels belong to the farther surface); rows with
    no valid pixel are filled vertically; a median filter removes speckle.
    """
    values = pd.DataFrame(np.where(disparity.valid, disparity.d, np.nan).astype(float))
    if values.isna().all().all():
        return np.zeros(disparity.d.shape)

    from_left = values.ffill(axis=1).to_numpy()
    from_right = values.bfill(axis=1).to_numpy()
    filled = pd.DataFrame(np.fmin(from_left, from_right))
    filled = filled.ffill(axis=0).bfill(axis=0).to_numpy()

    if median_size > 1:
        filled = ndimage.median_filter(filled, size=median_size, mode="nearest")
    return filled


def sample_disparity(disparity: DisparityMap, x: int, y: int, radius: int = 5) -> Optional[float]:
    """Disparity at (x, y), or the median of valid values within ``radius`` when invalid."""
    value = disparity.value_at(x, y)
    if value is not None:
        return value

    window = disparity.d[max(0, y - radius):y + radius + 1, max(0, x - radius):x + radius + 1]
    valid = window[window != INVALID]
    if valid.size == 0:
        return None

    logger.warning(f"Disparity invalid at ({x}, {y}); using neighbourhood median")
    return float(np.median(valid))


def save_disparity(disparity: DisparityMap, prefix: Union[str, Path]) -> None:
    """Write ``<prefix>.pgm`` (round(d / omega * 255)) and the lossless ``<prefix>.csv``."""
    prefix = Path(prefix)
    save_pnm(GrayImage(disparity_levels(disparity)), prefix.with_suffix(".pgm"))

    ys, xs = np.nonzero(disparity.valid)
    frame = pd.DataFrame({"x": xs, "y": ys, "d": disparity.d[ys, xs]})
    frame.to_csv(prefix.with_suffix(".csv"), index=False)
    logger.info(f"Disparity written to {prefix}.pgm / {prefix}.csv ({len(frame)} valid pixels)")
