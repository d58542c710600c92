"""Square fiducial marker detection (start pose) and goal circle detection."""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import cv2
import numpy as np

from services.edge_service import EdgeMap, canny_relative
from services.feature_service import FeaturePoint
from services.hough_service import CircleDetection, hough_circles
from services.stereo_service import DisparityMap, sample_disparity
from utils.errors import Ambiguous, GoalNotFound, InvalidConfig, IoFailure, NotFound
from utils.geometry import Ray, ray_intersect
from utils.image_utils import GrayImage
from utils.random_utils import Lcg

logger = logging.getLogger(__name__)

# Pixels per cell of the rectified marker patch used for decoding
DECODE_CELL = 8


@dataclass(frozen=True, eq=False)
class MarkerDictionary:
    """
    Payload codes of the square markers, one grid x grid bit matrix per id.

    Bit 1 is a white cell. Every marker additionally carries a one-cell
    black border around the payload.
    """

    grid: int
    codes: Tuple[np.ndarray, ...]

    def __post_init__(self):
        for index, code in enumerate(self.codes):
            if code.shape != (self.grid, self.grid):
                raise InvalidConfig(f"Code {index} has shape {code.shape}, expected {self.grid}x{self.grid}")
        if self.min_rotation_distance() < 1:
            raise InvalidConfig("Marker codes are not distinguishable under rotation")

    def __len__(self) -> int:
        return len(self.codes)

    def min_rotation_distance(self) -> int:
        """Smallest Hamming distance between any code and any other rotation of any code."""
        best = self.grid * self.grid
        for i, code in enumerate(self.codes):
            for j, other in enumerate(self.codes):
                for k in range(4):
                    if i == j and k == 0:
                        continue
                    best = min(best, int((code != np.rot90(other, k)).sum()))
        return best

    @classmethod
    def generate(cls, count: int = 16, grid: int = 4, seed: int = 1, min_distance: int = 3,
                 max_attempts: int = 200000) -> "MarkerDictionary":
        """
        Greedy deterministic dictionary.

        Candidates are drawn from ``Lcg(seed)`` (low grid*grid bits of each
        ``next_u32``) and accepted when they keep distance ``min_distance``
        to their own non-identity rotations and to every rotation of every
        accepted code, and have at least ``min_distance`` cells of each color.
        """
        rng = Lcg(seed)
        cells = grid * grid
        codes: List[np.ndarray] = []

        for _ in range(max_attempts):
            if len(codes) == count:
                break
            word = rng.next_u32() & ((1 << cells) - 1)
            code = np.array([(word >> bit) & 1 for bit in range(cells)], dtype=np.uint8).reshape(grid, grid)

            white = int(code.sum())
            if white < min_distance or cells - white < min_distance:
                continue
            if any((code != np.rot90(code, k)).sum() < min_distance for k in (1, 2, 3)):
                continue
            if any(
                (code != np.rot90(other, k)).sum() < min_distance
                for other in codes
                for k in range(4)
            ):
                continue
            codes.append(code)

        if len(codes) < count:
            raise InvalidConfig(f"Could only generate {len(codes)} of {count} markers at distance {min_distance}")

        logger.debug(f"Generated {count} marker codes ({grid}x{grid}, seed {seed})")
        return cls(grid=grid, codes=tuple(codes))

    def pattern(self, marker_id: int, cell: int) -> np.ndarray:
        """Marker raster (black border plus payload), (grid + 2) * cell pixels square, 0 or 255."""
        if not 0 <= marker_id < len(self.codes):
            raise InvalidConfig(f"Marker id {marker_id} not in dictionary of {len(self.codes)}")
        bits = np.zeros((self.grid + 2, self.grid + 2), dtype=np.uint8)
        bits[1:-1, 1:-1] = self.codes[marker_id]
        return np.kron(bits, np.ones((cell, cell), dtype=np.uint8)) * 255

    def to_text(self) -> str:
        lines = [f"# grid {self.grid}"]
        for marker_id, code in enumerate(self.codes):
            lines.append(f"[marker {marker_id}]")
            lines.extend("".join(str(int(b)) for b in row) for row in code)
        return "\n".join(lines) + "\n"

    def dump(self, path: Union[str, Path]) -> None:
        try:
            Path(path).write_text(self.to_text())
        except OSError as e:
            raise IoFailure(f"Cannot write dictionary to {path}: {e}") from e


@dataclass(frozen=True)
class MarkerPose:
    """In-plane marker pose; yaw is the direction of the marker's top edge (TL to TR) in image axes."""

    id: int
    center: Tuple[float, float]
    yaw: float
    corners: Tuple[Tuple[float, float], ...] = field(default=(), compare=False)

    @property
    def side(self) -> float:
        """Mean edge length of the detected quad."""
        if len(self.corners) != 4:
            return 0.0
        pts = np.asarray(self.corners)
        edges = pts - np.roll(pts, -1, axis=0)
        return float(np.hypot(edges[:, 0], edges[:, 1]).mean())


def format_pose(pose: MarkerPose) -> str:
    """Pose as ``id,cx,cy,yaw_deg``."""
    return f"{pose.id},{pose.center[0]:.2f},{pose.center[1]:.2f},{math.degrees(pose.yaw):.2f}"


class MarkerDetector:
    """Finds the single dictionary marker in a top-down terrain image."""

    def __init__(self, dictionary: MarkerDictionary, window: int = 15, offset: float = 7,
                 approx_tolerance: float = 0.03, min_area: float = 100):
        if window < 3 or window % 2 == 0:
            raise InvalidConfig(f"Threshold window must be odd and >= 3, got {window}")
        self.dictionary = dictionary
        self.window = window
        self.offset = offset
        self.approx_tolerance = approx_tolerance
        self.min_area = min_area

    def detect(self, image: GrayImage) -> MarkerPose:
        """
        Detect the marker and return its pose.

        Args:
            image: Terrain image containing at most one marker

        Returns:
            MarkerPose of the decoded marker

        Raises:
            NotFound: No candidate quad decodes
            Ambiguous: Two distinct quads decode
        """
        gray = image.data.copy()
        decoded = []

        for quad, area in self.quad_candidates(gray):
            pose = self.decode(gray, quad)
            if pose is not None:
                decoded.append((pose, area))

        # Outer and inner contours of one marker decode to the same pose
        decoded.sort(key=lambda item: -item[1])
        distinct: List[MarkerPose] = []
        for pose, area in decoded:
            if any(
                pose.id == kept.id and math.dist(pose.center, kept.center) <= max(kept.side / 4, 2.0)
                for kept in distinct
            ):
                continue
            distinct.append(pose)

        if not distinct:
            raise NotFound("No marker found in the image")
        if len(distinct) > 1:
            raise Ambiguous(f"{len(distinct)} markers decoded: ids {[p.id for p in distinct]}")

        pose = distinct[0]
        logger.info(f"Marker {pose.id} at ({pose.center[0]:.1f}, {pose.center[1]:.1f}), yaw {math.degrees(pose.yaw):.1f} deg")
        return pose

    def threshold(self, gray: np.ndarray) -> np.ndarray:
        """Dark pixels relative to the local mean, after a light blur against texture speckle."""
        blurred = cv2.GaussianBlur(gray, (3, 3), 0)
        return cv2.adaptiveThreshold(
            blurred, 255, cv2.ADAPTIVE_THRESH_MEAN_C, cv2.THRESH_BINARY_INV, self.window, self.offset
        )

    def quad_candidates(self, gray: np.ndarray) -> List[Tuple[np.ndarray, float]]:
        """Convex 4-vertex contour approximations, corners clockwise on screen, sub-pixel refined."""
        binary = self.threshold(gray)
        contours, _ = cv2.findContours(binary, cv2.RETR_LIST, cv2.CHAIN_APPROX_SIMPLE)

        quads = []
        for contour in contours:
            perimeter = cv2.arcLength(contour, True)
            approx = cv2.approxPolyDP(contour, self.approx_tolerance * perimeter, True)
            if len(approx) != 4 or not cv2.isContourConvex(approx):
                continue
            area = cv2.contourArea(approx)
            if area < self.min_area:
                continue

            corners = approx.reshape(4, 2).astype(np.float32)
            if _signed_area(corners) < 0:
                corners = corners[::-1]

            criteria = (cv2.TERM_CRITERIA_EPS + cv2.TERM_CRITERIA_MAX_ITER, 30, 0.01)
            refined = cv2.cornerSubPix(
                gray, np.ascontiguousarray(corners).reshape(4, 1, 2), (3, 3), (-1, -1), criteria
            )
            corners = refined.reshape(4, 2)
            quads.append((corners, float(area)))

        logger.debug(f"{len(contours)} contours, {len(quads)} quad candidates")
        return quads

    def decode(self, gray: np.ndarray, corners: np.ndarray) -> Optional[MarkerPose]:
        """Try the four corner orderings; the one reading a dictionary code unrotated gives TL first."""
        cells = self.dictionary.grid + 2
        side = cells * DECODE_CELL
        target = np.float32([[0, 0], [side, 0], [side, side], [0, side]])

        for start in range(4):
            ordered = np.roll(corners, -start, axis=0)
            transform = cv2.getPerspectiveTransform(ordered.astype(np.float32), target)
            patch = cv2.warpPerspective(gray, transform, (side, side), flags=cv2.INTER_LINEAR)
            bits = self.read_cells(patch, cells)
            if bits is None:
                return None

            for marker_id, code in enumerate(self.dictionary.codes):
                if np.array_equal(bits[1:-1, 1:-1], code):
                    return _pose_from_corners(marker_id, ordered)
        return None

    @staticmethod
    def read_cells(patch: np.ndarray, cells: int) -> Optional[np.ndarray]:
        """Cell bits of a rectified patch; None unless the border cells all read black."""
        _, binary = cv2.threshold(patch, 0, 255, cv2.THRESH_BINARY + cv2.THRESH_OTSU)

        # Sample the central half of every cell
        margin = DECODE_CELL // 4
        bits = np.zeros((cells, cells), dtype=np.uint8)
        for row in range(cells):
            for col in range(cells):
                y0, x0 = row * DECODE_CELL + margin, col * DECODE_CELL + margin
                window = binary[y0:y0 + DECODE_CELL - 2 * margin, x0:x0 + DECODE_CELL - 2 * margin]
                bits[row, col] = 1 if window.mean() > 127 else 0

        border = np.concatenate([bits[0], bits[-1], bits[:, 0], bits[:, -1]])
        if border.any():
            return None
        return bits


def _signed_area(corners: np.ndarray) -> float:
    """Shoelace area; positive for clockwise order on screen (y down)."""
    x, y = corners[:, 0], corners[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _pose_from_corners(marker_id: int, corners: np.ndarray) -> MarkerPose:
    tl, tr, br, bl = (tuple(map(float, c)) for c in corners)
    diagonal_a = Ray(tl, math.atan2(br[1] - tl[1], br[0] - tl[0]))
    diagonal_b = Ray(tr, math.atan2(bl[1] - tr[1], bl[0] - tr[0]))
    center = ray_intersect(diagonal_a, diagonal_b).point

    yaw = math.atan2(tr[1] - tl[1], tr[0] - tl[0])
    if yaw <= -math.pi:
        yaw = math.pi
    return MarkerPose(marker_id, center, yaw, (tl, tr, br, bl))


def detect_marker(image: GrayImage, dictionary: MarkerDictionary, window: int = 15, offset: float = 7,
                  approx_tolerance: float = 0.03, min_area: float = 100) -> MarkerPose:
    """Detect the single marker from ``dictionary`` in ``image``."""
    detector = MarkerDetector(dictionary, window, offset, approx_tolerance, min_area)
    return detector.detect(image)


def initial_point(pose: MarkerPose, disparity: Optional[DisparityMap] = None) -> FeaturePoint:
    """Marker center rounded to the nearest pixel, with its disparity when a map is given."""
    x = int(math.floor(pose.center[0] + 0.5))
    y = int(math.floor(pose.center[1] + 0.5))
    value = None
    if disparity is not None and 0 <= x < disparity.width and 0 <= y < disparity.height:
        value = sample_disparity(disparity, x, y)
    return FeaturePoint(x, y, value)


def find_goal_circle(image: GrayImage, r_min: int = 10, r_max: int = 40, sensitivity: float = 0.9,
                     sigma: float = 1.4, low_fraction: float = 0.1, high_fraction: float = 0.3,
                     ignore: Optional[np.ndarray] = None) -> CircleDetection:
    """
    Highest-score circle in the Canny edges of ``image``.

    Args:
        image: Terrain image
        r_min: Smallest goal radius
        r_max: Largest goal radius
        sensitivity: Circle Hough sensitivity
        sigma: Canny smoothing
        low_fraction: Weak Canny threshold relative to the peak gradient
        high_fraction: Strong Canny threshold relative to the peak gradient
        ignore: Optional mask of pixels whose edges are discarded (e.g. the marker)

    Returns:
        The best CircleDetection
    """
    edges = canny_relative(image, sigma, low_fraction, high_fraction)
    if ignore is not None:
        edges = EdgeMap(edges.on & ~ignore)

    circles = hough_circles(edges, r_min, r_max, sensitivity)
    if not circles:
        raise GoalNotFound(f"No circle with radius in [{r_min}, {r_max}] found")
    return circles[0]


def detect_goal(image: GrayImage, r_min: int = 10, r_max: int = 40, sensitivity: float = 0.9,
                disparity: Optional[DisparityMap] = None, **kwargs) -> FeaturePoint:
    """Desired point: the center of the best goal circle."""
    circle = find_goal_circle(image, r_min, r_max, sensitivity, **kwargs)
    a, b = circle.center
    value = sample_disparity(disparity, a, b) if disparity is not None else None

    logger.info(f"Goal circle at ({a}, {b}), r={circle.radius}, score {circle.score:.2f}")
    return FeaturePoint(a, b, value)


def marker_mask(pose: MarkerPose, shape: Tuple[int, int], pad: float = 0.0) -> np.ndarray:
    """Boolean mask of the marker quad grown by ``pad`` pixels."""
    mask = np.zeros(shape, dtype=np.uint8)
    if len(pose.corners) == 4:
        corners = np.asarray(pose.corners, dtype=float)
        center = np.asarray(pose.center, dtype=float)
        offsets = corners - center
        scale = 1.0 + pad * math.sqrt(2) / max(np.hypot(offsets[:, 0], offsets[:, 1]).mean(), 1e-9)
        grown = np.round(center + offsets * scale).astype(np.int32)
        cv2.fillConvexPoly(mask, grown, 1)
    return mask.astype(bool)


def circle_mask(circle: CircleDetection, shape: Tuple[int, int], pad: float = 0.0) -> np.ndarray:
    mask = np.zeros(shape, dtype=np.uint8)
    cv2.circle(mask, circle.center, int(math.ceil(circle.radius + pad)), 1, thickness=-1)
    return mask.astype(bool)
