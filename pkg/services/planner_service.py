"""Corner way-point graph and shortest path extraction."""

import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, model_validator
from scipy import ndimage

from services.feature_service import (
    Corner,
    FeaturePoint,
    cap_candidates,
    filter_candidates,
    ground_reference,
    standoff_corners,
    thin_candidates,
)
from services.fiducial_service import MarkerPose
from services.hough_service import CircleDetection
from services.stereo_service import DisparityMap
from utils.errors import NoPath
from utils.geometry import LineSegment, Point, colliding_legs, polyline_length
from utils.image_utils import GrayImage

logger = logging.getLogger(__name__)

# Sampling step along legs for the off-ground check, in pixels
GROUND_SAMPLE_STEP = 2.0


class VehicleSpec(BaseModel):
    """Vehicle footprint in pixels."""

    length: float = 60.0
    width: float = 40.0

    @model_validator(mode="after")
    def check_footprint(self):
        if not self.length >= self.width > 0:
            raise ValueError("vehicle needs length >= width > 0")
        return self

    @property
    def clearance(self) -> float:
        return self.width / 2


@dataclass
class PlanningScene:
    """
    Everything the graph builder needs, as produced by the detection stages.

    ``obstacles`` holds the merged segments of the terrain and disparity edge
    maps; ``terrain_obstacles`` only those of the intensity image, the view
    a depth-blind planner gets.
    """

    terrain: GrayImage
    disparity: DisparityMap
    obstacles: List[LineSegment]
    start: FeaturePoint
    goal: FeaturePoint
    vehicle: VehicleSpec
    corners: List[Corner] = field(default_factory=list)
    terrain_obstacles: List[LineSegment] = field(default_factory=list)
    disparity_raster: Optional[np.ndarray] = None
    marker: Optional[MarkerPose] = None
    goal_circle: Optional[CircleDetection] = None
    stage_times: Dict[str, float] = field(default_factory=dict)
    ground_maps: Dict[float, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def width(self) -> int:
        return self.terrain.width

    @property
    def height(self) -> int:
        return self.terrain.height

    @property
    def ground_radius(self) -> float:
        """Keep-out distance around off-ground terrain: the clearance plus half a matching window."""
        return self.vehicle.clearance + self.disparity.window // 2

    def ground_clearance(self, tol: float) -> Optional[np.ndarray]:
        """
        Distance map to off-ground terrain for tolerance ``tol``, computed once per tolerance.

        Off-ground specks smaller than a quarter of the clearance squared are
        treated as disparity noise. None without a disparity raster.
        """
        if self.disparity_raster is None:
            return None
        if tol not in self.ground_maps:
            reference = ground_reference(self.start, self.goal)
            min_area = (self.vehicle.clearance / 2) ** 2
            self.ground_maps[tol] = off_ground_distance(self.disparity_raster, reference, tol, min_area)
        return self.ground_maps[tol]


@dataclass
class WaypointGraph:
    """Undirected graph; node 0 is the start, node 1 the goal."""

    nodes: List[Tuple[int, int]]
    edges: List[Tuple[int, int, float]]
    candidates: List[FeaturePoint]
    build_seconds: float = 0.0

    def adjacency(self) -> Dict[int, List[Tuple[int, float]]]:
        neighbours: Dict[int, List[Tuple[int, float]]] = {i: [] for i in range(len(self.nodes))}
        for i, j, weight in self.edges:
            neighbours[i].append((j, weight))
            neighbours[j].append((i, weight))
        return neighbours

    def edge_set(self) -> set:
        return {(min(i, j), max(i, j)) for i, j, _ in self.edges}


@dataclass
class PlanResult:
    waypoints: List[Point]
    length: float
    elapsed: float
    candidates_considered: int
    graph_edges: int
    algorithm: str = "proposed"
    cells: Optional[List[Tuple[int, int]]] = None
    candidates: List[FeaturePoint] = field(default_factory=list, repr=False)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.waypoints, columns=["x", "y"])

    def summary_line(self) -> str:
        return (
            f"length_px={self.length:.3f},elapsed_s={self.elapsed:.6f},"
            f"candidates={self.candidates_considered},edges={self.graph_edges}"
        )


def off_ground_distance(raster: np.ndarray, reference: float, tol: float, min_area: float = 0.0) -> np.ndarray:
    """
    Distance in pixels from every pixel to the nearest off-ground pixel.

    A pixel is off-ground when its disparity leaves ``reference +- tol``.
    Connected off-ground specks smaller than ``min_area`` pixels are ignored.
    Without any off-ground pixel every distance is infinite.
    """
    off = np.abs(np.asarray(raster, dtype=float) - reference) > tol
    if min_area > 0 and off.any():
        labels, count = ndimage.label(off, structure=np.ones((3, 3), dtype=bool))
        sizes = np.bincount(labels.ravel(), minlength=count + 1)
        off &= sizes[labels] >= min_area
    if not off.any():
        return np.full(off.shape, np.inf)
    return ndimage.distance_transform_edt(~off)


def legs_near_off_ground(distance: np.ndarray, heads: np.ndarray, tails: np.ndarray, radius: float,
                         step: float = GROUND_SAMPLE_STEP) -> np.ndarray:
    """
    Mask of legs passing within ``radius`` of off-ground terrain.

    Every leg is sampled at most ``step`` pixels apart and each sample reads
    the nearest pixel of ``distance``. A sample counts as near at
    ``radius + step / 2 + 1`` or less, which covers the stretch between
    samples and the rounding to pixel centers.
    """
    heads = np.asarray(heads, dtype=float).reshape(-1, 2)
    tails = np.asarray(tails, dtype=float).reshape(-1, 2)
    near = np.zeros(len(heads), dtype=bool)
    if not len(heads):
        return near

    delta = tails - heads
    lengths = np.hypot(delta[:, 0], delta[:, 1])
    counts = np.maximum(2, np.ceil(lengths / step).astype(int) + 1)
    leg = np.repeat(np.arange(len(heads)), counts)
    position = np.arange(leg.size) - np.repeat(np.cumsum(counts) - counts, counts)
    t = position / (counts[leg] - 1)

    height, width = distance.shape
    xs = np.clip(np.floor(heads[leg, 0] + t * delta[leg, 0] + 0.5).astype(int), 0, width - 1)
    ys = np.clip(np.floor(heads[leg, 1] + t * delta[leg, 1] + 0.5).astype(int), 0, height - 1)
    close = distance[ys, xs] <= radius + step / 2 + 1.0
    near[leg[close]] = True
    return near


def select_candidates(scene: PlanningScene, tol: float, margin: float = 8.0,
                      cap: int = 500, spacing: float = 0.0) -> List[FeaturePoint]:
    """Standoff corner positions on the ground level, thinned to ``spacing`` and capped to the best ``cap``."""
    moved = standoff_corners(scene.corners, scene.vehicle.clearance, margin, scene.width, scene.height)
    candidates = filter_candidates(moved, scene.disparity, scene.start, scene.goal, tol)

    # Collapse candidates that landed on the same pixel, and the endpoints themselves
    seen = {scene.start.xy, scene.goal.xy}
    unique = []
    for point in sorted(candidates, key=lambda p: (-p.score, p.y, p.x)):
        if point.xy not in seen:
            seen.add(point.xy)
            unique.append(point)
    unique = thin_candidates(unique, spacing)
    return cap_candidates(sorted(unique, key=lambda p: (p.y, p.x)), cap)


def build_graph(scene: PlanningScene, tol: float, margin: float = 8.0, cap: int = 500,
                depth_check: bool = True, spacing: float = 0.0) -> WaypointGraph:
    """
    Build the intersection-free way-point graph.

    Nodes are the start, the goal and the ground-level candidates. Two nodes
    are joined iff the straight leg between them stays at least
    ``vehicle.width / 2`` away from every obstacle segment and, with
    ``depth_check``, more than ``PlanningScene.ground_radius`` away from
    terrain whose disparity leaves the ground level by more than ``tol``.
    Candidates inside that keep-out band are dropped before the edges are built.

    Args:
        scene: Scene from the detection stages
        tol: Ground-level tolerance in disparity units
        margin: Extra standoff beyond the clearance for corner way-points
        cap: Maximum number of candidates
        depth_check: Reject legs near off-ground terrain
        spacing: Minimum distance between candidates (0 keeps all)

    Returns:
        WaypointGraph with Euclidean edge weights
    """
    began = time.perf_counter()
    candidates = select_candidates(scene, tol, margin, cap, spacing)

    ground = scene.ground_clearance(tol) if depth_check else None
    radius = scene.ground_radius
    if ground is not None:
        reach = radius + GROUND_SAMPLE_STEP / 2 + 1.0
        candidates = [p for p in candidates if ground[p.y, p.x] > reach]

    nodes = [scene.start.xy, scene.goal.xy] + [p.xy for p in candidates]
    edges: List[Tuple[int, int, float]] = []
    if scene.start.xy != scene.goal.xy:
        first, second = np.triu_indices(len(nodes), k=1)
        points = np.asarray(nodes, dtype=float)
        heads, tails = points[first], points[second]
        keep = ~colliding_legs(heads, tails, scene.obstacles, scene.vehicle.clearance)

        if ground is not None:
            rows = np.flatnonzero(keep)
            keep[rows] = ~legs_near_off_ground(ground, heads[rows], tails[rows], radius)

        lengths = np.hypot(tails[:, 0] - heads[:, 0], tails[:, 1] - heads[:, 1])
        edges = [
            (int(i), int(j), float(weight))
            for i, j, weight in zip(first[keep], second[keep], lengths[keep])
        ]

    graph = WaypointGraph(nodes, edges, candidates, time.perf_counter() - began)
    logger.info(f"Way-point graph: {len(nodes)} nodes, {len(edges)} edges ({graph.build_seconds:.3f}s)")
    return graph


def shortest_path(graph: WaypointGraph, start: int = 0, goal: int = 1) -> PlanResult:
    """
    Dijkstra from ``start`` to ``goal``.

    Equal lengths prefer fewer way-points, then the lexicographically
    smaller sequence of node coordinates.

    Raises:
        NoPath: start and goal are not connected
    """
    began = time.perf_counter()
    nodes = graph.nodes
    considered = len(graph.candidates)

    if nodes[start] == nodes[goal]:
        return PlanResult([nodes[start]], 0.0, graph.build_seconds, considered, len(graph.edges),
                          candidates=graph.candidates)

    neighbours = graph.adjacency()
    best: Dict[int, Tuple[float, int, Tuple]] = {}
    queue = [(0.0, 0, (nodes[start],), start)]

    while queue:
        length, hops, path, node = heapq.heappop(queue)
        if node in best:
            continue
        best[node] = (length, hops, path)
        if node == goal:
            break
        for other, weight in neighbours[node]:
            if other not in best:
                heapq.heappush(queue, (length + weight, hops + 1, path + (nodes[other],), other))

    if goal not in best:
        raise NoPath(f"No collision-free path between {nodes[start]} and {nodes[goal]}")

    waypoints = list(best[goal][2])
    elapsed = graph.build_seconds + time.perf_counter() - began
    result = PlanResult(waypoints, polyline_length(waypoints), elapsed, considered, len(graph.edges),
                        candidates=graph.candidates)
    logger.info(f"Path with {len(waypoints)} way-points, length {result.length:.1f}px")
    return result


def plan_scene(scene: PlanningScene, tol: float, margin: float = 8.0, cap: int = 500,
               depth_check: bool = True, spacing: float = 0.0) -> PlanResult:
    """build_graph followed by shortest_path."""
    graph = build_graph(scene, tol, margin, cap, depth_check, spacing)
    return shortest_path(graph)

