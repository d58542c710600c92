"""Synthetic top-down stereo scenes with known heightfields.

A scene is a flat textured ground plane carrying positive obstacles (boxes,
hills) and negative ones (craters), the vehicle's marker and the goal disk.
The left image is the orthographic view of the textured surface; the right
image moves every surface pixel left by its disparity d = 2 f l / z with
z = camera height - elevation, nearer surfaces winning where they overlap.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from skimage.draw import disk as draw_disk

from services.fiducial_service import MarkerDictionary
from services.stereo_service import StereoRig
from utils.errors import InvalidConfig, IoFailure, OverlapError
from utils.image_utils import GrayImage, save_raster
from utils.keyvalue_utils import format_keyvalue, load_keyvalue, parse_keyvalue

logger = logging.getLogger(__name__)

GROUND_LEVEL = 128.0
TEXTURE_AMPLITUDE = 12.0
BOX_SHADE = 50.0
CRATER_SHADE = -50.0
HILL_SHADE = 40.0
GOAL_LEVEL = 40.0
MARKER_BLACK = 20.0
MARKER_WHITE = 235.0
DISK_POLYGON_VERTICES = 32
MARKER_SUPERSAMPLE = 4


class ObstacleKind(str, Enum):
    BOX = "box"
    CRATER = "crater"
    HILL = "hill"


class ObstacleSpec(BaseModel):
    """
    One terrain obstacle.

    ``rect`` footprints cover x <= px < x + width, y <= py < y + height;
    ``disk`` footprints are centered at (x, y). Elevation is in meters,
    positive for boxes and hills, negative for craters.
    """

    kind: ObstacleKind
    shape: Literal["rect", "disk"] = "rect"
    x: float
    y: float
    width: float = 0.0
    height: float = 0.0
    radius: float = 0.0
    elevation: float
    hidden: bool = False

    @model_validator(mode="after")
    def check_geometry(self):
        if self.kind == ObstacleKind.CRATER and self.elevation >= 0:
            raise ValueError("crater elevation must be negative")
        if self.kind != ObstacleKind.CRATER and self.elevation <= 0:
            raise ValueError(f"{self.kind.value} elevation must be positive")
        if self.kind == ObstacleKind.HILL and self.shape != "disk":
            raise ValueError("hills are radial and need a disk footprint")
        if self.shape == "rect" and (self.width <= 0 or self.height <= 0):
            raise ValueError("rect footprint needs positive width and height")
        if self.shape == "disk" and self.radius <= 0:
            raise ValueError("disk footprint needs a positive radius")
        if self.hidden and self.kind != ObstacleKind.CRATER:
            raise ValueError("only craters can be hidden")
        return self

    def polygon(self) -> np.ndarray:
        """Footprint outline in pixel coordinates, (N, 2) as (x, y)."""
        if self.shape == "rect":
            x0, y0 = self.x, self.y
            x1, y1 = self.x + self.width, self.y + self.height
            return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)
        angles = np.linspace(0.0, 2 * math.pi, DISK_POLYGON_VERTICES, endpoint=False)
        return np.stack([self.x + self.radius * np.cos(angles), self.y + self.radius * np.sin(angles)], axis=1)

    def mask(self, shape: Tuple[int, int]) -> np.ndarray:
        """Boolean footprint raster."""
        out = np.zeros(shape, dtype=bool)
        if self.shape == "rect":
            x0, y0 = max(int(math.ceil(self.x)), 0), max(int(math.ceil(self.y)), 0)
            x1 = min(int(math.ceil(self.x + self.width)), shape[1])
            y1 = min(int(math.ceil(self.y + self.height)), shape[0])
            out[y0:y1, x0:x1] = True
        else:
            rr, cc = draw_disk((self.y, self.x), self.radius, shape=shape)
            out[rr, cc] = True
        return out


class MarkerSpec(BaseModel):
    x: float
    y: float
    yaw_deg: float = 0.0
    id: int = 0
    side: float = 48.0

    @field_validator("side")
    @classmethod
    def side_large_enough(cls, value):
        if value < 40:
            raise ValueError("marker side must be at least 40 px")
        return value


class GoalSpec(BaseModel):
    x: float
    y: float
    radius: float = 25.0

    @field_validator("radius")
    @classmethod
    def radius_in_detector_range(cls, value):
        if not 10 <= value <= 40:
            raise ValueError("goal radius must be within [10, 40] px")
        return value


class PatchSpec(BaseModel):
    """Rectangle whose texture variance is zeroed (reflective surface)."""

    x: int
    y: int
    width: int
    height: int


class SceneSpec(BaseModel):
    name: str = "scene"
    width: int = Field(gt=0)
    height: int = Field(gt=0)
    obstacles: List[ObstacleSpec] = []
    marker: MarkerSpec
    goal: GoalSpec
    focal: float = Field(default=500.0, gt=0)
    half_baseline: float = Field(default=0.15, gt=0)
    camera_height: float = Field(default=10.0, gt=0)
    texture_seed: int = 0
    reflective_patches: List[PatchSpec] = []

    @model_validator(mode="after")
    def check_layout(self):
        for obstacle in self.obstacles:
            if obstacle.elevation >= self.camera_height:
                raise ValueError("obstacle reaches the camera")
        for label, (x, y) in (("marker", (self.marker.x, self.marker.y)), ("goal", (self.goal.x, self.goal.y))):
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise ValueError(f"{label} lies outside the image")
        return self

    @property
    def rig(self) -> StereoRig:
        return StereoRig(self.focal, self.half_baseline)

    @property
    def ground_disparity(self) -> int:
        return int(math.floor(self.rig.disparity_at_depth(self.camera_height) + 0.5))


@dataclass(frozen=True, eq=False)
class SceneTruth:
    """Ground truth exported with a render."""

    obstacle_polygons: List[np.ndarray]
    obstacle_kinds: List[str]
    heightfield: np.ndarray
    disparity: np.ndarray
    start: Tuple[float, float]
    goal: Tuple[float, float]
    hidden: List[bool] = field(default_factory=list)


def build_heightfield(spec: SceneSpec) -> np.ndarray:
    """
    Elevation raster in meters.

    Boxes are flat plateaus, craters flat depressions and hills radial
    cosine bumps peaking at their height in the footprint center.

    Raises:
        OverlapError: Two obstacle footprints share a pixel
    """
    shape = (spec.height, spec.width)
    heightfield = np.zeros(shape)
    covered = np.zeros(shape, dtype=bool)

    for index, obstacle in enumerate(spec.obstacles):
        mask = obstacle.mask(shape)
        if (mask & covered).any():
            raise OverlapError(f"Obstacle {index} ({obstacle.kind.value}) overlaps another obstacle")
        covered |= mask

        if obstacle.kind == ObstacleKind.HILL:
            ys, xs = np.nonzero(mask)
            distance = np.hypot(xs - obstacle.x, ys - obstacle.y)
            heightfield[ys, xs] = obstacle.elevation * 0.5 * (1 + np.cos(math.pi * np.minimum(distance / obstacle.radius, 1.0)))
        else:
            heightfield[mask] = obstacle.elevation

    return heightfield


def truth_disparity(spec: SceneSpec, heightfield: np.ndarray) -> np.ndarray:
    """Integer disparity round(2 f l / (camera_height - elevation)) per left pixel."""
    depth = spec.camera_height - heightfield
    return np.floor(2 * spec.focal * spec.half_baseline / depth + 0.5).astype(np.int32)


def _marker_cells(spec: SceneSpec, dictionary: MarkerDictionary, xs: np.ndarray, ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Marker intensity and coverage (quiet zone included) at real pixel positions."""
    marker = spec.marker
    cells = dictionary.grid + 2
    cell = marker.side / cells
    yaw = math.radians(marker.yaw_deg)

    dx, dy = xs - marker.x, ys - marker.y
    u = (dx * math.cos(yaw) + dy * math.sin(yaw)) / cell + cells / 2
    v = (-dx * math.sin(yaw) + dy * math.cos(yaw)) / cell + cells / 2

    inside_zone = (u >= -1) & (u < cells + 1) & (v >= -1) & (v < cells + 1)
    inside_marker = (u >= 0) & (u < cells) & (v >= 0) & (v < cells)

    bits = np.zeros((cells, cells), dtype=np.uint8)
    bits[1:-1, 1:-1] = dictionary.codes[marker.id]
    col = np.clip(np.floor(u).astype(int), 0, cells - 1)
    row = np.clip(np.floor(v).astype(int), 0, cells - 1)

    level = np.where(inside_marker & (bits[row, col] == 0), MARKER_BLACK, MARKER_WHITE)
    return level, inside_zone


def render_marker(intensity: np.ndarray, spec: SceneSpec, dictionary: MarkerDictionary,
                  texture: np.ndarray) -> None:
    """
    Paint the marker with a one-cell white quiet zone into ``intensity``.

    The top edge of the marker points along (cos yaw, sin yaw) in image axes.
    Pixels are supersampled so rotated cell borders are anti-aliased.
    """
    marker = spec.marker
    if not 0 <= marker.id < len(dictionary):
        raise InvalidConfig(f"Marker id {marker.id} not in dictionary")

    cells = dictionary.grid + 2
    reach = int(math.ceil(marker.side / cells * (cells + 2) / math.sqrt(2) * 1.5)) + 2
    x0, x1 = max(int(marker.x) - reach, 0), min(int(marker.x) + reach + 1, spec.width)
    y0, y1 = max(int(marker.y) - reach, 0), min(int(marker.y) + reach + 1, spec.height)
    if x0 >= x1 or y0 >= y1:
        return

    ys, xs = np.mgrid[y0:y1, x0:x1].astype(float)
    steps = (np.arange(MARKER_SUPERSAMPLE) + 0.5) / MARKER_SUPERSAMPLE - 0.5
    total = np.zeros(xs.shape)
    coverage = np.zeros(xs.shape)
    for sy in steps:
        for sx in steps:
            level, inside = _marker_cells(spec, dictionary, xs + sx, ys + sy)
            total += np.where(inside, level, 0.0)
            coverage += inside

    samples = MARKER_SUPERSAMPLE ** 2
    touched = coverage > 0
    weight = coverage / samples
    region = intensity[y0:y1, x0:x1]
    noise = texture[y0:y1, x0:x1] - GROUND_LEVEL
    painted = np.where(touched, total / np.maximum(coverage, 1) + noise, region)
    region[:] = weight * painted + (1 - weight) * region


def _texture(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    texture = GROUND_LEVEL + rng.uniform(-TEXTURE_AMPLITUDE, TEXTURE_AMPLITUDE, (spec.height, spec.width))
    for patch in spec.reflective_patches:
        texture[patch.y:patch.y + patch.height, patch.x:patch.x + patch.width] = GROUND_LEVEL
    return texture


def _shading(spec: SceneSpec, heightfield: np.ndarray) -> np.ndarray:
    shape = (spec.height, spec.width)
    shade = np.zeros(shape)
    for obstacle in spec.obstacles:
        mask = obstacle.mask(shape)
        if obstacle.kind == ObstacleKind.BOX:
            shade[mask] = BOX_SHADE
        elif obstacle.kind == ObstacleKind.CRATER and not obstacle.hidden:
            shade[mask] = CRATER_SHADE
        elif obstacle.kind == ObstacleKind.HILL:
            shade[mask] = HILL_SHADE * heightfield[mask] / obstacle.elevation
    return shade


def render_left(spec: SceneSpec, heightfield: np.ndarray, dictionary: MarkerDictionary,
                rng: np.random.Generator) -> np.ndarray:
    """Real-valued left intensity: texture, obstacle shading, goal disk and marker."""
    texture = _texture(spec, rng)
    intensity = texture + _shading(spec, heightfield)

    goal = spec.goal
    rr, cc = draw_disk((goal.y, goal.x), goal.radius, shape=intensity.shape)
    intensity[rr, cc] = GOAL_LEVEL + (texture[rr, cc] - GROUND_LEVEL)

    render_marker(intensity, spec, dictionary, texture)
    return intensity


def splat_right(left: np.ndarray, disparity: np.ndarray, fill: np.ndarray) -> np.ndarray:
    """
    Move every left pixel d pixels towards x = 0.

    Levels are written in ascending disparity so nearer surfaces overwrite
    farther ones; pixels no surface lands on keep ``fill``.
    """
    right = fill.copy()
    for level in np.unique(disparity):
        ys, xs = np.nonzero(disparity == level)
        target = xs - int(level)
        keep = target >= 0
        right[ys[keep], target[keep]] = left[ys[keep], xs[keep]]
    return right


def occlusion_mask(disparity: np.ndarray) -> np.ndarray:
    """Left pixels that are hidden in the right view or leave it."""
    height, width = disparity.shape
    owner = np.full((height, width), -1, dtype=np.int64)
    for level in np.unique(disparity):
        ys, xs = np.nonzero(disparity == level)
        target = xs - int(level)
        keep = target >= 0
        owner[ys[keep], target[keep]] = xs[keep]

    ys, xs = np.mgrid[0:height, 0:width]
    target = xs - disparity
    visible = np.zeros((height, width), dtype=bool)
    inside = target >= 0
    visible[inside] = owner[ys[inside], target[inside]] == xs[inside]
    return ~visible


def render_stereo(spec: SceneSpec, dictionary: Optional[MarkerDictionary] = None) -> Tuple[GrayImage, GrayImage, SceneTruth]:
    """
    Render the rectified top-down stereo pair and its ground truth.

    Args:
        spec: Scene description
        dictionary: Marker dictionary (default: the 16-id dictionary from seed 1)

    Returns:
        Tuple of (left, right, truth)
    """
    dictionary = dictionary or MarkerDictionary.generate()
    rng = np.random.default_rng(spec.texture_seed)

    heightfield = build_heightfield(spec)
    disparity = truth_disparity(spec, heightfield)

    left = GrayImage.from_raster(render_left(spec, heightfield, dictionary, rng))
    fill = GrayImage.from_raster(_texture(spec, rng))
    right = GrayImage(splat_right(left.data, disparity, fill.data))

    truth = SceneTruth(
        obstacle_polygons=[o.polygon() for o in spec.obstacles],
        obstacle_kinds=[o.kind.value for o in spec.obstacles],
        heightfield=heightfield,
        disparity=disparity,
        start=(spec.marker.x, spec.marker.y),
        goal=(spec.goal.x, spec.goal.y),
        hidden=[o.hidden for o in spec.obstacles],
    )
    logger.info(
        f"Rendered {spec.name} ({spec.width}x{spec.height}, {len(spec.obstacles)} obstacles, "
        f"ground disparity {spec.ground_disparity})"
    )
    return left, right, truth


def _box(x, y, w, h, elevation) -> ObstacleSpec:
    return ObstacleSpec(kind=ObstacleKind.BOX, x=x, y=y, width=w, height=h, elevation=elevation)


def preset_scenes() -> List[SceneSpec]:
    """Four test scenes at the 759x763, 808x814, 808x814 and 1500x1500 sizes plus the hidden-crater scene."""
    return [
        SceneSpec(
            name="scene-1", width=759, height=763, texture_seed=1,
            marker=MarkerSpec(x=100, y=660, id=3), goal=GoalSpec(x=650, y=110),
            obstacles=[
                _box(300, 300, 120, 120, 5.0),
                _box(520, 420, 100, 140, 6.0),
                ObstacleSpec(kind=ObstacleKind.CRATER, x=150, y=150, width=120, height=90, elevation=-7.0),
            ],
        ),
        SceneSpec(
            name="scene-2", width=808, height=814, texture_seed=2,
            marker=MarkerSpec(x=110, y=700, id=5), goal=GoalSpec(x=690, y=120),
            obstacles=[
                _box(250, 480, 140, 90, 4.5),
                _box(470, 250, 110, 160, 5.5),
                ObstacleSpec(kind=ObstacleKind.HILL, shape="disk", x=640, y=560, radius=70, elevation=3.0),
            ],
        ),
        SceneSpec(
            name="scene-3", width=808, height=814, texture_seed=3,
            marker=MarkerSpec(x=120, y=120, yaw_deg=90, id=7), goal=GoalSpec(x=680, y=680),
            obstacles=[
                _box(300, 250, 100, 100, 5.0),
                _box(480, 480, 120, 100, 6.25),
                ObstacleSpec(kind=ObstacleKind.CRATER, shape="disk", x=250, y=560, radius=60, elevation=-7.0),
            ],
        ),
        SceneSpec(
            name="scene-4", width=1500, height=1500, texture_seed=4,
            marker=MarkerSpec(x=150, y=1350, id=9), goal=GoalSpec(x=1350, y=150, radius=30),
            obstacles=[
                _box(400, 1000, 160, 120, 5.0),
                _box(700, 650, 140, 200, 5.5),
                _box(1000, 350, 180, 140, 4.5),
                _box(1100, 900, 150, 150, 6.0),
                _box(300, 300, 200, 120, 5.0),
                ObstacleSpec(kind=ObstacleKind.CRATER, x=650, y=1250, width=200, height=120, elevation=-7.0),
            ],
        ),
        SceneSpec(
            name="hidden-crater", width=640, height=480, texture_seed=5,
            marker=MarkerSpec(x=80, y=240, id=1), goal=GoalSpec(x=560, y=240),
            obstacles=[
                ObstacleSpec(kind=ObstacleKind.CRATER, x=260, y=120, width=120, height=240,
                             elevation=-7.0, hidden=True),
                _box(430, 150, 50, 180, 5.0),
            ],
        ),
    ]


def find_preset(key: str) -> SceneSpec:
    """Preset by 1-based index or by name."""
    presets = preset_scenes()
    if key.isdigit() and 1 <= int(key) <= len(presets):
        return presets[int(key) - 1]
    for spec in presets:
        if spec.name == key:
            return spec
    raise InvalidConfig(f"Unknown preset {key!r}; choose 1-{len(presets)} or one of {[s.name for s in presets]}")


_SCALAR_KEYS = ("name", "width", "height", "focal", "half_baseline", "camera_height", "texture_seed")


def scene_from_keyvalue(top: Dict[str, str], blocks: List[Tuple[str, Dict[str, str]]]) -> SceneSpec:
    """
    Build a SceneSpec from parsed key-value content.

    Top-level keys: name, width, height, focal, half_baseline, camera_height,
    texture_seed, marker (x, y), marker_yaw, marker_id, marker_side,
    goal (x, y), goal_radius. Blocks ``[box]``, ``[crater]`` and ``[hill]``
    carry obstacle fields; ``[reflective]`` blocks carry x, y, width, height.
    """
    try:
        marker_x, marker_y = (float(v) for v in top["marker"].split(","))
        goal_x, goal_y = (float(v) for v in top["goal"].split(","))
    except KeyError as e:
        raise InvalidConfig(f"Scene file misses required key {e}") from e
    except ValueError as e:
        raise InvalidConfig(f"marker and goal must be 'x, y' pairs: {e}") from e

    values: Dict[str, object] = {key: top[key] for key in _SCALAR_KEYS if key in top}
    values["marker"] = {
        "x": marker_x, "y": marker_y,
        "yaw_deg": top.get("marker_yaw", 0.0),
        "id": top.get("marker_id", 0),
        "side": top.get("marker_side", 48.0),
    }
    values["goal"] = {"x": goal_x, "y": goal_y, "radius": top.get("goal_radius", 25.0)}

    obstacles, patches = [], []
    for header, keys in blocks:
        if header == "reflective":
            patches.append(keys)
        elif header in {kind.value for kind in ObstacleKind}:
            obstacles.append({"kind": header, **keys})
        else:
            raise InvalidConfig(f"Unknown block [{header}] in scene file")
    values["obstacles"] = obstacles
    values["reflective_patches"] = patches

    try:
        return SceneSpec.model_validate(values)
    except ValidationError as e:
        raise InvalidConfig(f"Invalid scene: {e}") from e


def parse_scene_spec(text: str) -> SceneSpec:
    return scene_from_keyvalue(*parse_keyvalue(text))


def load_scene_spec(path: Union[str, Path]) -> SceneSpec:
    return scene_from_keyvalue(*load_keyvalue(path))


def dump_scene_spec(spec: SceneSpec) -> str:
    """Serialize a SceneSpec in the key-value grammar; parse_scene_spec reads it back."""
    top = {
        "name": spec.name,
        "width": spec.width,
        "height": spec.height,
        "focal": spec.focal,
        "half_baseline": spec.half_baseline,
        "camera_height": spec.camera_height,
        "texture_seed": spec.texture_seed,
        "marker": f"{spec.marker.x}, {spec.marker.y}",
        "marker_yaw": spec.marker.yaw_deg,
        "marker_id": spec.marker.id,
        "marker_side": spec.marker.side,
        "goal": f"{spec.goal.x}, {spec.goal.y}",
        "goal_radius": spec.goal.radius,
    }
    blocks = []
    for obstacle in spec.obstacles:
        keys = {"shape": obstacle.shape, "x": obstacle.x, "y": obstacle.y}
        if obstacle.shape == "rect":
            keys.update(width=obstacle.width, height=obstacle.height)
        else:
            keys["radius"] = obstacle.radius
        keys["elevation"] = obstacle.elevation
        if obstacle.hidden:
            keys["hidden"] = "true"
        blocks.append((obstacle.kind.value, keys))
    for patch in spec.reflective_patches:
        blocks.append(("reflective", patch.model_dump()))
    return format_keyvalue(top, blocks)


def truth_to_frame(truth: SceneTruth) -> pd.DataFrame:
    """Polygon table with columns obstacle, kind, vertex, x, y."""
    rows = [
        (index, kind, vertex, float(x), float(y))
        for index, (kind, polygon) in enumerate(zip(truth.obstacle_kinds, truth.obstacle_polygons))
        for vertex, (x, y) in enumerate(polygon)
    ]
    return pd.DataFrame(rows, columns=["obstacle", "kind", "vertex", "x", "y"])


def export_truth(truth: SceneTruth, prefix: Union[str, Path]) -> None:
    """Write ``<prefix>_polygons.csv`` and ``<prefix>_height.pgm`` (elevation scaled to [0, 255])."""
    prefix = Path(prefix)
    try:
        truth_to_frame(truth).to_csv(f"{prefix}_polygons.csv", index=False)
    except OSError as e:
        raise IoFailure(f"Cannot write truth polygons for {prefix}: {e}") from e

    heightfield = truth.heightfield
    low, high = float(heightfield.min()), float(heightfield.max())
    span = high - low if high > low else 1.0
    save_raster((heightfield - low) / span, f"{prefix}_height.pgm", vmax=1.0)
    logger.info(f"Ground truth written to {prefix}_polygons.csv / {prefix}_height.pgm")
