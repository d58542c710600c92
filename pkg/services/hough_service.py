"""Hough line segments for obstacle boundaries and the two-phase circle transform for the goal."""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import cv2
import numpy as np
import pandas as pd
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from skimage.draw import circle_perimeter

from services.edge_service import EdgeMap
from utils.errors import BadRadii, InvalidConfig
from utils.geometry import LineSegment

logger = logging.getLogger(__name__)

# Edge pixels closer than this to a peak line belong to it
LINE_BAND = 1.0
# Upper bound on centers carried from the voting phase into radius selection
MAX_CIRCLE_CANDIDATES = 200
CROSS = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class HoughLineConfig:
    """
    Accumulator resolution and run rules for segment extraction.

    ``max_len`` is the length above which segments are split into equal
    pieces; None disables splitting.
    """

    rho_res: float = 1.0
    theta_res: float = math.radians(1.0)
    vote_threshold: int = 30
    min_len: float = 20.0
    max_gap: float = 5.0
    max_len: Optional[float] = None

    def __post_init__(self):
        for name in ("rho_res", "theta_res", "vote_threshold", "min_len", "max_gap"):
            if getattr(self, name) <= 0:
                raise InvalidConfig(f"HoughLineConfig.{name} must be positive")
        if self.max_len is not None and self.max_len < self.min_len:
            raise InvalidConfig("HoughLineConfig.max_len must be at least min_len")

    @classmethod
    def for_vehicle(cls, vehicle, split_factor: float = 4.0, **overrides) -> "HoughLineConfig":
        """min_len = shorter vehicle side, split length = split_factor x longer side."""
        values = {
            "min_len": float(min(vehicle.length, vehicle.width)),
            "max_len": float(split_factor * max(vehicle.length, vehicle.width)),
        }
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class CircleDetection:
    center: Tuple[int, int]
    radius: int
    score: float


def _accumulate(xs: np.ndarray, ys: np.ndarray, thetas: np.ndarray, rho_res: float,
                diagonal: float, chunk: int = 20000) -> np.ndarray:
    n_rho = int(np.floor(2 * diagonal / rho_res + 0.5)) + 1
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    columns = np.arange(len(thetas))[None, :]
    votes = np.zeros(n_rho * len(thetas), dtype=np.int64)

    for begin in range(0, len(xs), chunk):
        rho = np.outer(xs[begin:begin + chunk], cos_t) + np.outer(ys[begin:begin + chunk], sin_t)
        rho_index = np.floor((rho + diagonal) / rho_res + 0.5).astype(np.int64)
        flat = rho_index * len(thetas) + columns
        votes += np.bincount(flat.ravel(), minlength=len(votes))
    return votes.reshape(n_rho, len(thetas))


def _peaks(accumulator: np.ndarray, threshold: int) -> List[Tuple[int, int, int]]:
    """Local 3x3 maxima at or above the threshold, strongest first (ties by rho, theta index)."""
    local = accumulator == ndimage.maximum_filter(accumulator, size=3, mode="constant")
    rows, cols = np.nonzero(local & (accumulator >= threshold))
    peaks = [(int(accumulator[r, c]), int(r), int(c)) for r, c in zip(rows, cols)]
    peaks.sort(key=lambda p: (-p[0], p[1], p[2]))
    return peaks


def _split_runs(t: np.ndarray, max_gap: float) -> List[Tuple[int, int]]:
    """Index ranges [start, end) of sorted positions where no gap exceeds max_gap pixels."""
    if len(t) == 0:
        return []
    breaks = np.flatnonzero(np.diff(t) - 1.0 > max_gap) + 1
    bounds = [0, *breaks.tolist(), len(t)]
    return list(zip(bounds[:-1], bounds[1:]))


def hough_segments(edges: EdgeMap, cfg: HoughLineConfig) -> List[LineSegment]:
    """
    Extract line segments from an edge map with the standard (rho, theta) transform.

    Peaks are visited strongest first. Each peak collects the unclaimed edge
    pixels within one pixel of its line, orders them along the line, cuts
    them into runs at gaps wider than ``max_gap`` and emits every run whose
    projected endpoints are at least ``min_len`` apart. Pixels of emitted
    runs are claimed so weaker neighbouring peaks do not repeat the segment.

    Args:
        edges: Binary edge map
        cfg: Accumulator and run configuration

    Returns:
        Segments inside the image bounds, split at ``cfg.max_len`` when set
    """
    ys, xs = np.nonzero(edges.on)
    if len(xs) == 0:
        return []

    height, width = edges.on.shape
    diagonal = math.hypot(width, height)
    thetas = np.arange(0.0, math.pi, cfg.theta_res)
    accumulator = _accumulate(xs.astype(float), ys.astype(float), thetas, cfg.rho_res, diagonal)

    unclaimed = np.ones(len(xs), dtype=bool)
    segments = []
    for _, rho_index, theta_index in _peaks(accumulator, cfg.vote_threshold):
        theta = thetas[theta_index]
        rho = rho_index * cfg.rho_res - diagonal
        cos_t, sin_t = math.cos(theta), math.sin(theta)

        near = unclaimed & (np.abs(xs * cos_t + ys * sin_t - rho) <= LINE_BAND)
        if near.sum() < cfg.vote_threshold:
            continue

        members = np.flatnonzero(near)
        along = -xs[members] * sin_t + ys[members] * cos_t
        order = np.argsort(along, kind="stable")
        members, along = members[order], along[order]

        for begin, end in _split_runs(along, cfg.max_gap):
            head = _project(rho, cos_t, sin_t, along[begin], width, height)
            tail = _project(rho, cos_t, sin_t, along[end - 1], width, height)
            segment = LineSegment(head, tail, votes=end - begin)
            if segment.is_degenerate or segment.length < cfg.min_len:
                continue
            segments.append(segment)
            unclaimed[members[begin:end]] = False

    if cfg.max_len is not None:
        segments = split_long_segments(segments, cfg.max_len)

    logger.info(f"Hough transform: {len(xs)} edge pixels -> {len(segments)} segments")
    return segments


def _project(rho: float, cos_t: float, sin_t: float, t: float, width: int, height: int) -> Tuple[int, int]:
    x = rho * cos_t - t * sin_t
    y = rho * sin_t + t * cos_t
    return (
        int(min(max(math.floor(x + 0.5), 0), width - 1)),
        int(min(max(math.floor(y + 0.5), 0), height - 1)),
    )


def split_long_segments(segments: Sequence[LineSegment], max_len: float) -> List[LineSegment]:
    """Cut every segment longer than max_len into equal pieces no longer than max_len."""
    if max_len <= 0:
        raise InvalidConfig(f"max_len must be positive, got {max_len}")

    pieces = []
    for segment in segments:
        count = max(1, int(math.ceil(segment.length / max_len)))
        if count == 1:
            pieces.append(segment)
            continue

        (hx, hy), (tx, ty) = segment.head, segment.tail
        nodes = [
            (int(math.floor(hx + k / count * (tx - hx) + 0.5)), int(math.floor(hy + k / count * (ty - hy) + 0.5)))
            for k in range(count + 1)
        ]
        nodes[0], nodes[-1] = segment.head, segment.tail
        pieces.extend(
            LineSegment(a, b, segment.votes) for a, b in zip(nodes[:-1], nodes[1:]) if a != b
        )
    return pieces


def _merge_once(segments: List[LineSegment], merge_radius: float) -> Optional[List[LineSegment]]:
    """One clustering round; None when no two distinct nodes lie within the radius."""
    nodes = sorted({p for s in segments for p in (s.head, s.tail)})
    if len(nodes) < 2:
        return None

    points = np.asarray(nodes, dtype=float)
    pairs = cKDTree(points).query_pairs(merge_radius, output_type="ndarray")
    if len(pairs) == 0:
        return None

    graph = coo_matrix(
        (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(nodes), len(nodes))
    )
    _, labels = connected_components(graph, directed=False)
    centroids = {}
    for label in np.unique(labels):
        mean = points[labels == label].mean(axis=0)
        centroids[label] = (int(math.floor(mean[0] + 0.5)), int(math.floor(mean[1] + 0.5)))
    moved = {node: centroids[label] for node, label in zip(nodes, labels)}

    merged: Dict[Tuple, LineSegment] = {}
    for segment in segments:
        head, tail = moved[segment.head], moved[segment.tail]
        if head == tail:
            continue
        key = tuple(sorted((head, tail)))
        previous = merged.get(key)
        if previous is None or segment.votes > previous.votes:
            merged[key] = LineSegment(head, tail, segment.votes)
    return list(merged.values())


def merge_nodes(segments: Sequence[LineSegment], merge_radius: float) -> List[LineSegment]:
    """
    Merge segment endpoints lying within ``merge_radius`` of each other.

    Endpoints are clustered by single linkage, each cluster is replaced by
    its rounded centroid and segments whose ends collapse into one node are
    dropped; coincident segments keep the larger vote count. Rounds repeat
    until no two distinct nodes are within the radius, so merging twice
    gives the same result as merging once.
    """
    if merge_radius < 0:
        raise InvalidConfig(f"merge_radius must be non-negative, got {merge_radius}")

    current = list(segments)
    if merge_radius == 0:
        return current

    rounds = 0
    while True:
        merged = _merge_once(current, merge_radius)
        if merged is None:
            break
        current = merged
        rounds += 1

    logger.debug(f"merge_nodes: {len(segments)} -> {len(current)} segments in {rounds} rounds")
    return current


@lru_cache(maxsize=None)
def _ring_offsets(radius: int) -> Tuple[np.ndarray, np.ndarray]:
    """Unique (dy, dx) offsets of the digital circle of the given radius."""
    rr, cc = circle_perimeter(0, 0, radius)
    unique = np.unique(np.stack([rr, cc], axis=1), axis=0)
    return unique[:, 0], unique[:, 1]


def _coverage(tolerant: np.ndarray, a: int, b: int, r: int) -> float:
    dy, dx = _ring_offsets(r)
    rows, cols = b + dy, a + dx
    inside = (rows >= 0) & (rows < tolerant.shape[0]) & (cols >= 0) & (cols < tolerant.shape[1])
    hits = tolerant[rows[inside], cols[inside]].sum()
    return float(hits) / len(dy)


def circle_coverage(edges: EdgeMap, a: int, b: int, r: int) -> float:
    """Fraction of the digital circle (a, b, r) lying on or 4-adjacent to an edge pixel."""
    tolerant = ndimage.binary_dilation(edges.on, structure=CROSS)
    return _coverage(tolerant, a, b, r)


def score_threshold(sensitivity: float) -> float:
    """Minimum coverage accepted at the given sensitivity: 1 - sensitivity + 0.1, clamped to (0, 1]."""
    return float(min(1.0, max(1e-6, 1.0 - sensitivity + 0.1)))


def hough_circles(edges: EdgeMap, r_min: int, r_max: int, sensitivity: float = 0.9) -> List[CircleDetection]:
    """
    Two-phase circle Hough transform.

    Phase 1 fixes each radius in [r_min, r_max] and votes circle centers from
    the edge pixels; centers that are local maxima of the best per-radius
    vote fraction survive. Phase 2 picks, per surviving center, the radius
    whose perimeter is best covered by edges; that coverage is the score.

    Args:
        edges: Binary edge map
        r_min: Smallest radius searched
        r_max: Largest radius searched
        sensitivity: In (0, 1]; higher accepts weaker circles

    Returns:
        Detections with score >= score_threshold(sensitivity), best first
    """
    if r_min <= 0 or r_min >= r_max:
        raise BadRadii(f"Need 0 < r_min < r_max, got r_min={r_min}, r_max={r_max}")
    if not 0 < sensitivity <= 1:
        raise InvalidConfig(f"Sensitivity must be in (0, 1], got {sensitivity}")
    if not edges.on.any():
        return []

    score_min = score_threshold(sensitivity)
    source = edges.on.astype(np.float32)
    best_fraction = np.zeros(edges.on.shape, dtype=float)

    for r in range(r_min, r_max + 1):
        dy, dx = _ring_offsets(r)
        kernel = np.zeros((2 * r + 1, 2 * r + 1), dtype=np.float32)
        kernel[dy + r, dx + r] = 1.0
        votes = np.rint(cv2.filter2D(source, -1, kernel, borderType=cv2.BORDER_CONSTANT))
        np.maximum(best_fraction, votes / len(dy), out=best_fraction)

    peaks = best_fraction == ndimage.maximum_filter(best_fraction, size=5, mode="constant")
    peaks &= best_fraction >= score_min / 2
    rows, cols = np.nonzero(peaks)
    order = np.lexsort((cols, rows, -best_fraction[rows, cols]))[:MAX_CIRCLE_CANDIDATES]

    tolerant = ndimage.binary_dilation(edges.on, structure=CROSS)
    detections = []
    for index in order:
        a, b = int(cols[index]), int(rows[index])
        ranked = max(
            range(r_min, r_max + 1),
            key=lambda r: (_coverage(tolerant, a, b, r), _coverage(edges.on, a, b, r), -r),
        )
        score = _coverage(tolerant, a, b, ranked)
        if score >= score_min:
            detections.append(CircleDetection((a, b), ranked, score))

    detections.sort(key=lambda d: (-d.score, d.center[1], d.center[0], d.radius))
    kept: List[CircleDetection] = []
    for detection in detections:
        if all(
            math.dist(detection.center, other.center) >= max(detection.radius, other.radius) / 2
            for other in kept
        ):
            kept.append(detection)

    logger.info(f"Circle Hough: {len(kept)} circles with r in [{r_min}, {r_max}] (score >= {score_min:.2f})")
    return kept


def segments_to_frame(segments: Sequence[LineSegment]) -> pd.DataFrame:
    """Segment table with columns hx, hy, tx, ty, votes."""
    return pd.DataFrame(
        [(s.head[0], s.head[1], s.tail[0], s.tail[1], s.votes) for s in segments],
        columns=["hx", "hy", "tx", "ty", "votes"],
    )


def circles_to_frame(circles: Sequence[CircleDetection]) -> pd.DataFrame:
    return pd.DataFrame(
        [(c.center[0], c.center[1], c.radius, round(c.score, 4)) for c in circles],
        columns=["a", "b", "r", "score"],
    )
