"""Grid baselines: occupancy rasterization, A* and PRM."""

import heapq
import logging
import math
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from services.planner_service import PlanningScene, PlanResult
from utils.errors import GoalInObstacle, InvalidConfig, NoPath, StartInObstacle
from utils.geometry import Point, polyline_length
from utils.image_utils import GrayImage
from utils.random_utils import Lcg

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]  # (col, row)

SQRT2 = math.sqrt(2.0)
MOVES = [
    (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
    (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2),
]


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Boolean occupancy raster, shape (rows, cols); cell (c, r) covers pixels [c*s - 0.5, (c+1)*s - 0.5)."""

    occupied: np.ndarray
    cell_size: int = 1

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    def is_free(self, cell: Cell) -> bool:
        col, row = cell
        return 0 <= col < self.width and 0 <= row < self.height and not self.occupied[row, col]

    def cell_of(self, point: Point) -> Cell:
        """Grid cell containing a pixel position."""
        return (
            int(math.floor((point[0] + 0.5) / self.cell_size)),
            int(math.floor((point[1] + 0.5) / self.cell_size)),
        )

    def center_of(self, cell: Cell) -> Point:
        """Pixel position of a cell center."""
        return (
            (cell[0] + 0.5) * self.cell_size - 0.5,
            (cell[1] + 0.5) * self.cell_size - 0.5,
        )


@dataclass(frozen=True)
class PrmConfig:
    n_samples: int = 300
    k_neighbors: int = 10
    seed: int = 42

    def __post_init__(self):
        if self.n_samples < 2:
            raise InvalidConfig(f"PRM needs n_samples >= 2, got {self.n_samples}")
        if self.k_neighbors < 1:
            raise InvalidConfig(f"PRM needs k_neighbors >= 1, got {self.k_neighbors}")


def supercover_cells(p0: Point, p1: Point) -> List[Cell]:
    """
    Every cell a straight line touches, in traversal order.

    Coordinates are continuous cell units (cell (c, r) spans [c, c+1) x [r, r+1)).
    A line through a cell corner also covers both cells sharing that corner.
    """
    x0, y0 = p0
    x1, y1 = p1
    cx, cy = int(math.floor(x0)), int(math.floor(y0))
    ex, ey = int(math.floor(x1)), int(math.floor(y1))
    dx, dy = x1 - x0, y1 - y0

    step_x = int(dx > 0) - int(dx < 0)
    step_y = int(dy > 0) - int(dy < 0)
    t_max_x = ((cx + (step_x > 0)) - x0) / dx if step_x else math.inf
    t_max_y = ((cy + (step_y > 0)) - y0) / dy if step_y else math.inf
    t_delta_x = abs(1.0 / dx) if step_x else math.inf
    t_delta_y = abs(1.0 / dy) if step_y else math.inf

    cells = [(cx, cy)]
    remaining = abs(ex - cx) + abs(ey - cy)
    while remaining > 0:
        if abs(t_max_x - t_max_y) < 1e-12:
            cells.append((cx + step_x, cy))
            cells.append((cx, cy + step_y))
            cx += step_x
            cy += step_y
            t_max_x += t_delta_x
            t_max_y += t_delta_y
            remaining -= 2
        elif t_max_x < t_max_y:
            cx += step_x
            t_max_x += t_delta_x
            remaining -= 1
        else:
            cy += step_y
            t_max_y += t_delta_y
            remaining -= 1
        cells.append((cx, cy))
    return cells


def rasterize(scene: PlanningScene, cell_size: int = 1, inflation: Optional[int] = None,
              depth_aware: bool = False) -> OccupancyGrid:
    """
    Occupancy grid of the scene's obstacle segments.

    A cell is occupied iff a segment passes through it; occupied cells are
    then dilated by ``inflation`` cells (Chebyshev). Start and goal cells
    that only the dilation covers are forced free.

    Args:
        scene: Planning scene
        cell_size: Pixels per cell
        inflation: Dilation radius in cells (default: vehicle clearance)
        depth_aware: Use the merged terrain and disparity segments instead of
            the intensity-only ones

    Returns:
        OccupancyGrid of ceil(height / cell_size) x ceil(width / cell_size) cells
    """
    if cell_size < 1:
        raise InvalidConfig(f"cell_size must be >= 1, got {cell_size}")
    if inflation is None:
        inflation = int(math.ceil(scene.vehicle.clearance / cell_size))
    if inflation < 0:
        raise InvalidConfig(f"inflation must be >= 0, got {inflation}")

    rows = int(math.ceil(scene.height / cell_size))
    cols = int(math.ceil(scene.width / cell_size))
    raw = np.zeros((rows, cols), dtype=bool)

    segments = scene.obstacles if depth_aware else scene.terrain_obstacles
    for segment in segments:
        head = ((segment.head[0] + 0.5) / cell_size, (segment.head[1] + 0.5) / cell_size)
        tail = ((segment.tail[0] + 0.5) / cell_size, (segment.tail[1] + 0.5) / cell_size)
        for col, row in supercover_cells(head, tail):
            if 0 <= col < cols and 0 <= row < rows:
                raw[row, col] = True

    occupied = raw
    if inflation > 0 and raw.any():
        occupied = ndimage.binary_dilation(raw, structure=np.ones((2 * inflation + 1,) * 2, dtype=bool))

    grid = OccupancyGrid(occupied, cell_size)
    for label, point, error in (("Start", scene.start.xy, StartInObstacle), ("Goal", scene.goal.xy, GoalInObstacle)):
        col, row = grid.cell_of(point)
        if raw[row, col]:
            raise error(f"{label} cell ({col}, {row}) lies on an obstacle")
        if occupied[row, col]:
            logger.warning(f"{label} cell ({col}, {row}) inside inflated obstacle; forcing it free")
            occupied[row, col] = False

    logger.info(
        f"Occupancy grid {cols}x{rows} (cell {cell_size}px, inflation {inflation}): "
        f"{int(occupied.sum())} occupied cells from {len(segments)} segments"
    )
    return grid


def _require_free(grid: OccupancyGrid, start: Cell, goal: Cell):
    if not grid.is_free(start):
        raise StartInObstacle(f"Start cell {start} is occupied or outside the grid")
    if not grid.is_free(goal):
        raise GoalInObstacle(f"Goal cell {goal} is occupied or outside the grid")


def octile(a: Cell, b: Cell) -> float:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def path_cost(cells: Sequence[Cell]) -> float:
    """Grid cost of a cell path: straight steps count 1, diagonal steps sqrt(2)."""
    diagonal = sum(1 for a, b in zip(cells, cells[1:]) if a[0] != b[0] and a[1] != b[1])
    return (len(cells) - 1 - diagonal) + diagonal * SQRT2


def _grid_result(grid: OccupancyGrid, cells: List[Cell], elapsed: float, considered: int,
                 edges: int, algorithm: str) -> PlanResult:
    waypoints = [grid.center_of(cell) for cell in cells]
    return PlanResult(waypoints, polyline_length(waypoints), elapsed, considered, edges, algorithm, cells)


def astar(grid: OccupancyGrid, start: Cell, goal: Cell) -> PlanResult:
    """
    A* over the 8-connected grid with the octile heuristic.

    Diagonal moves are forbidden when both orthogonal neighbours are occupied.

    Args:
        grid: Occupancy grid
        start: Start cell (col, row)
        goal: Goal cell (col, row)

    Returns:
        PlanResult with cell-center waypoints; candidates_considered counts expanded cells
    """
    _require_free(grid, start, goal)
    began = time.perf_counter()

    cols, rows = grid.width, grid.height
    blocked = grid.occupied.ravel().tolist()
    size = rows * cols
    cost = [math.inf] * size
    parent = [-1] * size
    closed = bytearray(size)

    source = start[1] * cols + start[0]
    target = goal[1] * cols + goal[0]
    cost[source] = 0.0
    queue = [(octile(start, goal), octile(start, goal), source)]
    expanded = 0

    while queue:
        _, _, node = heapq.heappop(queue)
        if closed[node]:
            continue
        closed[node] = 1
        expanded += 1
        if node == target:
            break

        y, x = divmod(node, cols)
        for dx, dy, step in MOVES:
            nx, ny = x + dx, y + dy
            if not (0 <= nx < cols and 0 <= ny < rows):
                continue
            neighbour = ny * cols + nx
            if blocked[neighbour] or closed[neighbour]:
                continue
            if dx and dy and blocked[y * cols + nx] and blocked[ny * cols + x]:
                continue
            candidate = cost[node] + step
            if candidate < cost[neighbour]:
                cost[neighbour] = candidate
                parent[neighbour] = node
                h = octile((nx, ny), goal)
                heapq.heappush(queue, (candidate + h, h, neighbour))

    if not closed[target]:
        raise NoPath(f"A*: goal {goal} unreachable from {start}")

    cells = []
    node = target
    while node != -1:
        cells.append((node % cols, node // cols))
        node = parent[node]
    cells.reverse()

    result = _grid_result(grid, cells, time.perf_counter() - began, expanded, 0, "astar")
    logger.info(f"A*: {len(cells)} cells, cost {path_cost(cells):.3f}, {expanded} expanded ({result.elapsed:.3f}s)")
    return result


def _boundary_cells(starts: np.ndarray, ends: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Cells touching each crossing of center-to-center lines with the vertical cell boundaries.

    Returns (line index, col, row) arrays. A crossing through a cell corner
    also yields the two cells above it. Positions are kept as exact integer
    fractions: for the line from (ax, ay) to (bx, by) with dx > 0, the
    crossing of boundary x = ax + j sits at y = N / 2dx with
    N = 2 dx ay + dx + dy (2j - 1).
    """
    flip = ends[:, 0] < starts[:, 0]
    a = np.where(flip[:, None], ends, starts)
    b = np.where(flip[:, None], starts, ends)
    dx = b[:, 0] - a[:, 0]
    dy = b[:, 1] - a[:, 1]

    line = np.repeat(np.arange(len(a)), dx)
    j = np.arange(line.size) - np.repeat(np.cumsum(dx) - dx, dx) + 1
    numerator = 2 * dx[line] * a[line, 1] + dx[line] + dy[line] * (2 * j - 1)
    denominator = 2 * dx[line]
    row = numerator // denominator
    corner = numerator % denominator == 0
    col = a[line, 0] + j

    lines = np.concatenate([line, line, line[corner], line[corner]])
    cols = np.concatenate([col - 1, col, col[corner] - 1, col[corner]])
    rows = np.concatenate([row, row, row[corner] - 1, row[corner] - 1])
    return lines, cols, rows


def lines_free(grid: OccupancyGrid, starts: Sequence[Cell], ends: Sequence[Cell]) -> np.ndarray:
    """
    Vectorized ``line_is_free`` over many cell pairs.

    A line is free iff its end cells and every cell its supercover touches
    are inside the grid and unoccupied; the touched cells are the ones on
    both sides of each cell boundary the line crosses.

    Args:
        grid: Occupancy grid
        starts: (N, 2) start cells (col, row)
        ends: (N, 2) end cells (col, row)

    Returns:
        (N,) boolean mask of free lines
    """
    starts = np.asarray(starts, dtype=np.int64).reshape(-1, 2)
    ends = np.asarray(ends, dtype=np.int64).reshape(-1, 2)
    padded = np.pad(grid.occupied, 1, constant_values=True)
    rows_max, cols_max = padded.shape[0] - 1, padded.shape[1] - 1

    def occupied(cols: np.ndarray, rows: np.ndarray) -> np.ndarray:
        return padded[np.clip(rows + 1, 0, rows_max), np.clip(cols + 1, 0, cols_max)]

    blocked = occupied(starts[:, 0], starts[:, 1]) | occupied(ends[:, 0], ends[:, 1])

    line, cols, rows = _boundary_cells(starts, ends)
    blocked[line[occupied(cols, rows)]] = True

    # Horizontal boundaries: the same walk with the axes swapped
    line, rows, cols = _boundary_cells(starts[:, ::-1], ends[:, ::-1])
    blocked[line[occupied(cols, rows)]] = True
    return ~blocked


def line_is_free(grid: OccupancyGrid, a: Cell, b: Cell) -> bool:
    """True iff every cell the center-to-center line touches is free."""
    return bool(lines_free(grid, [a], [b])[0])


def prm(grid: OccupancyGrid, cfg: PrmConfig, start: Cell, goal: Cell) -> PlanResult:
    """
    Probabilistic roadmap over the free cells.

    Samples come from the seeded Lcg (duplicates and the endpoints are
    skipped); every node, start and goal included, is tried against its
    k nearest neighbours and joined when the supercover line between them
    is free. All neighbour lines are checked in one vectorized pass; the
    roadmap is searched with Dijkstra.

    Raises:
        NoPath: The roadmap does not connect start and goal
    """
    _require_free(grid, start, goal)
    began = time.perf_counter()

    if start == goal:
        return _grid_result(grid, [start], time.perf_counter() - began, 1, 0, "prm")

    free = np.flatnonzero(~grid.occupied.ravel())
    rng = Lcg(cfg.seed)
    nodes = [start, goal]
    taken = set(nodes)
    for _ in range(cfg.n_samples):
        index = int(free[rng.below(len(free))])
        cell = (index % grid.width, index // grid.width)
        if cell not in taken:
            taken.add(cell)
            nodes.append(cell)

    points = np.asarray(nodes, dtype=float)
    k = min(cfg.k_neighbors + 1, len(nodes))
    _, nearest = cKDTree(points).query(points, k=k)

    # Unique unordered neighbour pairs, each checked once
    first = np.repeat(np.arange(len(nodes)), k)
    second = nearest.reshape(-1)
    distinct = first != second
    pairs = np.unique(np.sort(np.stack([first[distinct], second[distinct]], axis=1), axis=1), axis=0)

    cells = np.asarray(nodes, dtype=np.int64)
    joined = pairs[lines_free(grid, cells[pairs[:, 0]], cells[pairs[:, 1]])]
    heads, tails = joined[:, 0], joined[:, 1]
    legs = points[tails] - points[heads]
    weights = np.hypot(legs[:, 0], legs[:, 1]) * grid.cell_size

    roadmap = coo_matrix((weights, (heads, tails)), shape=(len(nodes), len(nodes))).tocsr()
    distances, predecessors = dijkstra(roadmap, directed=False, indices=0, return_predecessors=True)
    if math.isinf(distances[1]):
        raise NoPath(f"PRM: roadmap with {len(nodes)} nodes does not connect {start} and {goal}")

    order = []
    node = 1
    while node >= 0:
        order.append(node)
        node = int(predecessors[node])
    cells = [nodes[i] for i in reversed(order)]

    result = _grid_result(grid, cells, time.perf_counter() - began, len(nodes), len(weights), "prm")
    logger.info(f"PRM: {len(nodes)} nodes, {len(weights)} edges, path length {result.length:.1f}px")
    return result


def grid_to_image(grid: OccupancyGrid) -> GrayImage:
    """Occupied cells 0, free cells 255."""
    return GrayImage(np.where(grid.occupied, 0, 255))
