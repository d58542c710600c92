"""FAST corner detection and way-point candidate selection."""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from services.edge_service import gaussian_blur, sobel
from services.stereo_service import DisparityMap
from utils.errors import ImageTooSmall, InvalidConfig, StartGoalDisparityMismatch
from utils.image_utils import GrayImage, as_raster

logger = logging.getLogger(__name__)

# Radius-3 Bresenham circle, positions 1..16 clockwise from the top (image y points down)
BRESENHAM_RING: List[Tuple[int, int]] = [
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
]
RING_RADIUS = 3


class CornerSource(str, Enum):
    TERRAIN = "terrain_image"
    DISPARITY = "disparity_map"


@dataclass(frozen=True)
class Corner:
    """Segment-test corner; arc_direction points from p into the contrasting side."""

    x: int
    y: int
    score: float
    source: CornerSource = CornerSource.TERRAIN
    arc_direction: float = float("nan")


@dataclass(frozen=True)
class FeaturePoint:
    """Row of the feature matrix P = [x y I(p)]."""

    x: int
    y: int
    value: Optional[float] = None
    source: Optional[CornerSource] = None
    score: float = 0.0

    @property
    def xy(self) -> Tuple[int, int]:
        return (self.x, self.y)


def _best_arc_sums(mask: np.ndarray, contrast: np.ndarray, arc_length: int) -> np.ndarray:
    """
    Contrast sum of the best qualifying arc per pixel, -1 where no arc qualifies.

    Runs are tracked over the ring walked twice so arcs wrapping past
    position 16 are found; a ring that qualifies entirely sums all 16.
    """
    run = np.zeros(mask.shape[1:], dtype=np.int32)
    total = np.zeros(mask.shape[1:])
    best = np.full(mask.shape[1:], -1.0)

    for step in range(2 * len(BRESENHAM_RING)):
        k = step % len(BRESENHAM_RING)
        run = np.where(mask[k], run + 1, 0)
        total = np.where(mask[k], total + contrast[k], 0.0)
        best = np.where(run >= arc_length, np.maximum(best, total), best)

    whole = mask.all(axis=0)
    best[whole] = contrast.sum(axis=0)[whole]
    return best


def _segment_test(raster: np.ndarray, y0: int, y1: int, t: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Scores and qualifying ring masks for center rows [y0, y1) and columns [3, width - 3)."""
    r = RING_RADIUS
    width = raster.shape[1]
    center = raster[y0:y1, r:width - r]
    ring = np.stack([
        raster[y0 + dy:y1 + dy, r + dx:width - r + dx] for dx, dy in BRESENHAM_RING
    ])
    contrast = np.abs(ring - center)
    brighter = ring > center + t
    darker = ring < center - t

    bright_score = _best_arc_sums(brighter, contrast, n)
    dark_score = _best_arc_sums(darker, contrast, n)
    score = np.maximum(bright_score, dark_score)
    qualifying = np.where(bright_score >= 0, brighter, darker)
    return score, qualifying


def fast_detect(image: Union[GrayImage, np.ndarray], t: float, n: int = 12,
                source: CornerSource = CornerSource.TERRAIN, band: int = 128) -> List[Corner]:
    """
    FAST segment test on the 16-pixel Bresenham circle.

    A pixel p is a corner iff at least n contiguous ring pixels (wrapping
    around) are all brighter than I(p) + t or all darker than I(p) - t.

    Args:
        image: Terrain image or disparity raster
        t: Contrast threshold (> 0)
        n: Arc length, 9..16
        source: Tag stored on the returned corners
        band: Rows processed per vectorized pass

    Returns:
        Corners in row-major order, score = contrast sum over the qualifying arc
    """
    if t <= 0:
        raise InvalidConfig(f"FAST threshold must be positive, got {t}")
    if not 9 <= n <= 16:
        raise InvalidConfig(f"FAST arc length must be within [9, 16], got {n}")

    raster = as_raster(image)
    height, width = raster.shape
    if height < 7 or width < 7:
        raise ImageTooSmall(f"FAST needs at least 7x7 pixels, got {width}x{height}")

    r = RING_RADIUS
    offsets = np.array(BRESENHAM_RING, dtype=float)
    corners = []
    for y0 in range(r, height - r, band):
        y1 = min(y0 + band, height - r)
        score, qualifying = _segment_test(raster, y0, y1, t, n)

        for y, x in zip(*np.nonzero(score >= 0)):
            vx, vy = offsets[qualifying[:, y, x]].sum(axis=0)
            direction = math.atan2(vy, vx) if math.hypot(vx, vy) > 1e-9 else float("nan")
            corners.append(Corner(int(x) + r, int(y) + y0, float(score[y, x]), source, direction))

    logger.debug(f"FAST ({source.value}, t={t}, n={n}) found {len(corners)} corners")
    return corners


def _ranked(corners: Sequence[Corner]) -> List[Corner]:
    return sorted(corners, key=lambda c: (-c.score, c.y, c.x))


def nms_corners(corners: Sequence[Corner], radius: int) -> List[Corner]:
    """
    Greedy suppression by score (ties row-major): keep a corner iff no kept
    corner lies within Chebyshev distance ``radius``.
    """
    if radius < 1:
        raise InvalidConfig(f"NMS radius must be >= 1, got {radius}")

    cell = radius + 1
    buckets: Dict[Tuple[int, int], List[Corner]] = {}
    kept = []

    for corner in _ranked(corners):
        bx, by = corner.x // cell, corner.y // cell
        neighbours = (
            other
            for gx in (bx - 1, bx, bx + 1)
            for gy in (by - 1, by, by + 1)
            for other in buckets.get((gx, gy), ())
        )
        if any(max(abs(o.x - corner.x), abs(o.y - corner.y)) <= radius for o in neighbours):
            continue
        kept.append(corner)
        buckets.setdefault((bx, by), []).append(corner)

    return kept


def merge_corner_sources(terrain: Sequence[Corner], disparity: Sequence[Corner], radius: int = 2) -> List[Corner]:
    """Coordinate union of both corner sets; duplicates within ``radius`` keep the higher score."""
    return nms_corners(list(terrain) + list(disparity), radius)


def standoff_corners(corners: Sequence[Corner], clearance: float, margin: float,
                     width: int, height: int) -> List[Corner]:
    """
    Move corners out of the obstacle along their arc direction.

    The displacement sqrt(2) * (clearance + margin) puts a point derived from
    a convex right-angle corner at least clearance + margin away from both
    sides meeting there. Corners without a defined direction or that would
    leave the image are dropped.
    """
    distance = math.sqrt(2) * (clearance + margin)
    moved = []
    for corner in corners:
        if math.isnan(corner.arc_direction):
            continue
        x = int(math.floor(corner.x + distance * math.cos(corner.arc_direction) + 0.5))
        y = int(math.floor(corner.y + distance * math.sin(corner.arc_direction) + 0.5))
        if RING_RADIUS <= x < width - RING_RADIUS and RING_RADIUS <= y < height - RING_RADIUS:
            moved.append(replace(corner, x=x, y=y))
    return moved


def filter_candidates(corners: Sequence[Corner], disparity: DisparityMap, start: FeaturePoint,
                      goal: FeaturePoint, tol: float) -> List[FeaturePoint]:
    """
    Keep the corners lying on the traversable ground level.

    The ground reference is the mean of the start and goal disparities; a
    corner survives iff its disparity is valid and within ``tol`` of it.

    Args:
        corners: Candidate corners
        disparity: Disparity map the values are read from
        start: Initial point carrying its disparity
        goal: Desired point carrying its disparity
        tol: Allowed deviation in disparity units

    Returns:
        Feature points carrying their disparity values
    """
    if tol < 0:
        raise InvalidConfig(f"Tolerance must be non-negative, got {tol}")
    if start.value is None or goal.value is None:
        raise StartGoalDisparityMismatch("Start and goal must carry disparity values")
    if abs(start.value - goal.value) > 2 * tol:
        raise StartGoalDisparityMismatch(
            f"Start disparity {start.value} and goal disparity {goal.value} differ by more than 2*{tol}"
        )

    reference = ground_reference(start, goal)
    kept = []
    for corner in corners:
        value = disparity.value_at(corner.x, corner.y)
        if value is None or abs(value - reference) > tol:
            continue
        kept.append(FeaturePoint(corner.x, corner.y, value, corner.source, corner.score))

    logger.info(f"Pixel value condition kept {len(kept)} of {len(corners)} corners (ref {reference:.1f})")
    return kept


def ground_reference(start: FeaturePoint, goal: FeaturePoint) -> float:
    return (start.value + goal.value) / 2


def cap_candidates(candidates: Sequence[FeaturePoint], cap: int) -> List[FeaturePoint]:
    """Keep the ``cap`` highest-score candidates (ties row-major), in row-major order."""
    if len(candidates) <= cap:
        return list(candidates)

    logger.warning(f"Candidate cap applied: {len(candidates)} -> {cap}")
    best = sorted(candidates, key=lambda p: (-p.score, p.y, p.x))[:cap]
    return sorted(best, key=lambda p: (p.y, p.x))


def thin_candidates(candidates: Sequence[FeaturePoint], spacing: float) -> List[FeaturePoint]:
    """
    Greedy spacing filter: the best-scoring candidate wins and every other
    candidate within ``spacing`` pixels of a winner is dropped.

    Ties rank row-major; a spacing of 0 keeps everything.
    """
    if spacing <= 0 or len(candidates) < 2:
        return list(candidates)

    ranked = sorted(candidates, key=lambda p: (-p.score, p.y, p.x))
    tree = cKDTree(np.asarray([p.xy for p in ranked], dtype=float))
    dropped = np.zeros(len(ranked), dtype=bool)
    kept = []
    for index, point in enumerate(ranked):
        if dropped[index]:
            continue
        kept.append(point)
        dropped[tree.query_ball_point(point.xy, spacing)] = True

    if len(kept) < len(ranked):
        logger.info(f"Spacing {spacing:.1f}px thinned {len(ranked)} candidates to {len(kept)}")
    return kept


def harris_score(image: Union[GrayImage, np.ndarray], sigma: float = 1.0) -> np.ndarray:
    """
    Diagnostic corner response f = det(H) / trace(H) of the gradient structure tensor.

    H is built from Gaussian-weighted products of Sobel gradients; pixels
    with a zero trace score 0.
    """
    gradient = sobel(image)
    ixx = gaussian_blur(gradient.gx * gradient.gx, sigma)
    iyy = gaussian_blur(gradient.gy * gradient.gy, sigma)
    ixy = gaussian_blur(gradient.gx * gradient.gy, sigma)

    det = ixx * iyy - ixy * ixy
    trace = ixx + iyy
    return np.divide(det, trace, out=np.zeros_like(det), where=trace > 0)


def suppress_regions(corners: Sequence[Corner], mask: np.ndarray) -> List[Corner]:
    """Drop corners whose pixel is set in ``mask``."""
    return [c for c in corners if not mask[c.y, c.x]]


def candidates_to_frame(points: Sequence[FeaturePoint]) -> pd.DataFrame:
    """Candidate table with columns x, y, value, source."""
    return pd.DataFrame(
        {
            "x": [p.x for p in points],
            "y": [p.y for p in points],
            "value": [p.value for p in points],
            "source": [p.source.value if p.source else "" for p in points],
        },
        columns=["x", "y", "value", "source"],
    )


def corners_to_frame(corners: Sequence[Corner]) -> pd.DataFrame:
    return pd.DataFrame(
        [(c.x, c.y, c.score, c.source.value) for c in corners],
        columns=["x", "y", "score", "source"],
    )
