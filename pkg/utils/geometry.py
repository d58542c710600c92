"""Line intersection machinery: parametric rays, segment tests and clearance queries.

A ray is ``L = P + lambda * [cos(theta); sin(theta)]``. Two rays meet where

    [cos(t1)  -cos(t2)] [lambda1]
    [sin(t1)  -sin(t2)] [lambda2] = P2 - P1

Lambdas are kept in length units; a segment converted to a ray (origin = head,
theta = direction of tail - head) contains the point at lambda iff
0 <= lambda <= length, i.e. lambda / length in [0, 1].
"""

import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from utils.errors import DegenerateSegment, ParallelLines

Point = Tuple[float, float]

PARALLEL_EPS = 1e-9
LAMBDA_EPS = 1e-9


@dataclass(frozen=True)
class LineSegment:
    """Obstacle boundary or trajectory leg between a head and a tail node."""

    head: Point
    tail: Point
    votes: int = 0

    @property
    def length(self) -> float:
        return math.hypot(self.tail[0] - self.head[0], self.tail[1] - self.head[1])

    @property
    def is_degenerate(self) -> bool:
        return self.head == self.tail


@dataclass(frozen=True)
class Ray:
    origin: Point
    theta: float

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValueError("Ray theta must be finite")

    def at(self, lam: float) -> Point:
        return (
            self.origin[0] + lam * math.cos(self.theta),
            self.origin[1] + lam * math.sin(self.theta),
        )


@dataclass(frozen=True)
class Intersection:
    lambda1: float
    lambda2: float
    point: Point


def _require_segment(segment: LineSegment):
    if segment.is_degenerate:
        raise DegenerateSegment(f"Segment head equals tail at {segment.head}")


def segment_to_ray(segment: LineSegment) -> Ray:
    """Ray with origin at the head pointing at the tail."""
    _require_segment(segment)
    return Ray(
        segment.head,
        math.atan2(segment.tail[1] - segment.head[1], segment.tail[0] - segment.head[0]),
    )


def ray_intersect(r1: Ray, r2: Ray) -> Intersection:
    """
    Solve the two parametric line equations for their common point.

    Args:
        r1: First ray (P1, theta1)
        r2: Second ray (P2, theta2)

    Returns:
        Intersection with both lambdas and the point P3
    """
    c1, s1 = math.cos(r1.theta), math.sin(r1.theta)
    c2, s2 = math.cos(r2.theta), math.sin(r2.theta)

    det = s1 * c2 - c1 * s2  # sin(theta1 - theta2)
    if abs(det) <= PARALLEL_EPS:
        raise ParallelLines(f"Rays at {r1.theta:.6f} and {r2.theta:.6f} rad are parallel")

    dx = r2.origin[0] - r1.origin[0]
    dy = r2.origin[1] - r1.origin[1]
    lambda1 = (-s2 * dx + c2 * dy) / det
    lambda2 = (-s1 * dx + c1 * dy) / det

    return Intersection(lambda1, lambda2, r1.at(lambda1))


def _collinear_overlap(s1: LineSegment, s2: LineSegment) -> bool:
    """Overlap test for segments on parallel carrier lines."""
    length = s1.length
    ux = (s1.tail[0] - s1.head[0]) / length
    uy = (s1.tail[1] - s1.head[1]) / length

    tol = LAMBDA_EPS * max(1.0, length)
    for point in (s2.head, s2.tail):
        offset = (point[0] - s1.head[0]) * uy - (point[1] - s1.head[1]) * ux
        if abs(offset) > tol:
            return False

    ta = (s2.head[0] - s1.head[0]) * ux + (s2.head[1] - s1.head[1]) * uy
    tb = (s2.tail[0] - s1.head[0]) * ux + (s2.tail[1] - s1.head[1]) * uy
    return max(ta, tb) >= -tol and min(ta, tb) <= length + tol


def segments_intersect(s1: LineSegment, s2: LineSegment) -> bool:
    """
    True iff two closed segments share at least one point.

    Collinear overlapping segments count as intersecting.
    """
    r1 = segment_to_ray(s1)
    r2 = segment_to_ray(s2)

    try:
        hit = ray_intersect(r1, r2)
    except ParallelLines:
        return _collinear_overlap(s1, s2)

    l1, l2 = s1.length, s2.length
    return (
        -LAMBDA_EPS <= hit.lambda1 <= l1 + LAMBDA_EPS
        and -LAMBDA_EPS <= hit.lambda2 <= l2 + LAMBDA_EPS
    )


def normalized_lambdas(s1: LineSegment, s2: LineSegment) -> Tuple[float, float]:
    """Lambdas of the carrier-line intersection divided by the segment lengths."""
    hit = ray_intersect(segment_to_ray(s1), segment_to_ray(s2))
    return hit.lambda1 / s1.length, hit.lambda2 / s2.length


def point_segment_distance(point: Point, segment: LineSegment) -> float:
    """Euclidean distance from a point to a closed segment."""
    distances = _point_segment_distances(
        np.array([point], dtype=float),
        np.array(segment.head, dtype=float),
        np.array(segment.tail, dtype=float),
    )
    return float(distances[0])


def _point_segment_distances(points: np.ndarray, head: np.ndarray, tail: np.ndarray) -> np.ndarray:
    """Distances from many points (N, 2) to one segment."""
    direction = tail - head
    denom = float(direction @ direction)
    if denom == 0.0:
        return np.hypot(points[:, 0] - head[0], points[:, 1] - head[1])
    t = np.clip(((points - head) @ direction) / denom, 0.0, 1.0)
    closest = head + t[:, None] * direction
    return np.hypot(points[:, 0] - closest[:, 0], points[:, 1] - closest[:, 1])


def _points_to_segments(points: np.ndarray, heads: np.ndarray, tails: np.ndarray) -> np.ndarray:
    """Distances from one point per row to the segment in the same row."""
    direction = tails - heads
    denom = np.einsum("ij,ij->i", direction, direction)
    safe = np.where(denom > 0, denom, 1.0)
    t = np.clip(np.einsum("ij,ij->i", points - heads, direction) / safe, 0.0, 1.0)
    t = np.where(denom > 0, t, 0.0)
    closest = heads + t[:, None] * direction
    return np.hypot(points[:, 0] - closest[:, 0], points[:, 1] - closest[:, 1])


def segment_distances_batch(heads: np.ndarray, tails: np.ndarray, obstacle: LineSegment) -> np.ndarray:
    """
    Minimum distances from many segments to one obstacle segment.

    Uses the same ray formulation as ``segments_intersect`` for the crossing
    test; zero-length rows are treated as points.

    Args:
        heads: (M, 2) segment heads
        tails: (M, 2) segment tails
        obstacle: Non-degenerate obstacle segment

    Returns:
        (M,) array of distances, exactly 0 where the segments intersect
    """
    _require_segment(obstacle)
    heads = np.asarray(heads, dtype=float).reshape(-1, 2)
    tails = np.asarray(tails, dtype=float).reshape(-1, 2)
    h2 = np.array(obstacle.head, dtype=float)
    t2 = np.array(obstacle.tail, dtype=float)

    delta = tails - heads
    lengths = np.hypot(delta[:, 0], delta[:, 1])
    moving = lengths > 0

    theta1 = np.arctan2(delta[:, 1], delta[:, 0])
    c1, s1 = np.cos(theta1), np.sin(theta1)
    theta2 = math.atan2(t2[1] - h2[1], t2[0] - h2[0])
    c2, s2 = math.cos(theta2), math.sin(theta2)
    length2 = obstacle.length

    det = s1 * c2 - c1 * s2
    crossing = moving & (np.abs(det) > PARALLEL_EPS)
    safe_det = np.where(crossing, det, 1.0)
    dx = h2[0] - heads[:, 0]
    dy = h2[1] - heads[:, 1]
    lambda1 = (-s2 * dx + c2 * dy) / safe_det
    lambda2 = (-s1 * dx + c1 * dy) / safe_det
    hit = (
        crossing
        & (lambda1 >= -LAMBDA_EPS) & (lambda1 <= lengths + LAMBDA_EPS)
        & (lambda2 >= -LAMBDA_EPS) & (lambda2 <= length2 + LAMBDA_EPS)
    )

    parallel = moving & ~crossing
    for index in np.flatnonzero(parallel):
        leg = LineSegment(tuple(heads[index]), tuple(tails[index]))
        hit[index] = _collinear_overlap(leg, obstacle)

    count = len(heads)
    distances = np.minimum.reduce([
        _point_segment_distances(heads, h2, t2),
        _point_segment_distances(tails, h2, t2),
        _points_to_segments(np.broadcast_to(h2, (count, 2)), heads, tails),
        _points_to_segments(np.broadcast_to(t2, (count, 2)), heads, tails),
    ]) if count else np.zeros(0)

    return np.where(hit, 0.0, distances)


def segment_distance(s1: LineSegment, s2: LineSegment) -> float:
    """Minimum Euclidean distance between two closed segments (0 iff they intersect)."""
    _require_segment(s1)
    _require_segment(s2)
    if segments_intersect(s1, s2):
        return 0.0
    distances = segment_distances_batch(
        np.array([s1.head], dtype=float), np.array([s1.tail], dtype=float), s2
    )
    return float(distances[0])


def legs_clearance(heads: np.ndarray, tails: np.ndarray, obstacles: Sequence[LineSegment]) -> np.ndarray:
    """Minimum distance from each leg to any obstacle (inf without obstacles)."""
    heads = np.asarray(heads, dtype=float).reshape(-1, 2)
    tails = np.asarray(tails, dtype=float).reshape(-1, 2)
    clearance = np.full(len(heads), np.inf)
    for obstacle in obstacles:
        if obstacle.is_degenerate:
            continue
        np.minimum(clearance, segment_distances_batch(heads, tails, obstacle), out=clearance)
    return clearance


def colliding_legs(heads: np.ndarray, tails: np.ndarray, obstacles: Sequence[LineSegment],
                   clearance: float) -> np.ndarray:
    """
    Boolean mask of legs that touch an obstacle or pass closer than ``clearance``.

    Each obstacle is only measured against legs that are still free and whose
    bounding box, grown by ``clearance``, reaches the obstacle's bounding box.
    """
    heads = np.asarray(heads, dtype=float).reshape(-1, 2)
    tails = np.asarray(tails, dtype=float).reshape(-1, 2)
    low = np.minimum(heads, tails)
    high = np.maximum(heads, tails)
    blocked = np.zeros(len(heads), dtype=bool)
    active = np.arange(len(heads))

    for obstacle in obstacles:
        if obstacle.is_degenerate or not active.size:
            continue
        ends = np.array([obstacle.head, obstacle.tail], dtype=float)
        # Largest per-axis gap between the boxes; a lower bound of the distance
        gap = np.maximum(ends.min(axis=0) - high[active], low[active] - ends.max(axis=0)).max(axis=1)
        near = active[(gap <= 0) | (gap < clearance)]
        if not near.size:
            continue
        distances = segment_distances_batch(heads[near], tails[near], obstacle)
        blocked[near] = (distances == 0.0) | (distances < clearance)
        active = np.flatnonzero(~blocked)
    return blocked


def path_collides(waypoints: Sequence[Point], obstacles: Iterable[LineSegment], clearance: float = 0.0) -> bool:
    """
    True iff any leg of the polyline intersects an obstacle or passes within ``clearance`` of one.

    Args:
        waypoints: Polyline with at least two points
        obstacles: Obstacle boundary segments
        clearance: Minimum allowed distance in pixels

    Returns:
        Whether the path collides
    """
    if len(waypoints) < 2:
        raise ValueError("path_collides needs at least two waypoints")
    if clearance < 0:
        raise ValueError("clearance must be non-negative")

    points = np.asarray(waypoints, dtype=float)
    mask = colliding_legs(points[:-1], points[1:], list(obstacles), clearance)
    return bool(mask.any())


def polyline_length(waypoints: Sequence[Point]) -> float:
    """Sum of Euclidean leg lengths."""
    if len(waypoints) < 2:
        return 0.0
    points = np.asarray(waypoints, dtype=float)
    legs = np.diff(points, axis=0)
    return float(np.hypot(legs[:, 0], legs[:, 1]).sum())


def densify(waypoints: Sequence[Point], step: float = 1.0) -> List[Point]:
    """Points along the polyline no further than ``step`` apart (endpoints included)."""
    points = [tuple(map(float, waypoints[0]))] if waypoints else []
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        length = math.hypot(b[0] - a[0], b[1] - a[1])
        count = max(1, int(math.ceil(length / step)))
        for k in range(1, count + 1):
            t = k / count
            points.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
    return points
