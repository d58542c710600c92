"""End-to-end planning pipeline: stereo pair in, path out."""

import logging
import math
import time
from functools import lru_cache
from pathlib import Path
from typing import Dict, Mapping, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config import Config
from services.baseline_service import PrmConfig, astar, prm, rasterize
from services.edge_service import EdgeMap, canny
from services.feature_service import (
    CornerSource,
    FeaturePoint,
    fast_detect,
    merge_corner_sources,
    nms_corners,
    suppress_regions,
)
from services.fiducial_service import (
    MarkerDictionary,
    MarkerDetector,
    circle_mask,
    find_goal_circle,
    initial_point,
    marker_mask,
)
from services.hough_service import HoughLineConfig, hough_segments, merge_nodes
from services.planner_service import PlanningScene, PlanResult, VehicleSpec, plan_scene
from services.stereo_service import block_match, disparity_raster, sample_disparity, valid_fraction
from utils.errors import InvalidConfig, StereoFailure
from utils.image_utils import GrayImage
from utils.keyvalue_utils import load_keyvalue

logger = logging.getLogger(__name__)

ALGORITHMS = ("proposed", "astar", "prm")


class PipelineConfig(BaseModel):
    """
    Per-run snapshot of every pipeline tunable.

    Built from ``Config`` defaults, then a key-value config file, then
    command-line flags; later sources win.
    """

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    # Stereo
    omega: int = Field(default=Config.STEREO_OMEGA, ge=1)
    window: int = Field(default=Config.STEREO_WINDOW, ge=2)
    uniqueness: float = Field(default=Config.STEREO_UNIQUENESS, gt=0, le=1)
    max_invalid: float = Field(default=Config.STEREO_MAX_INVALID, gt=0, le=1)

    # Edges
    canny_sigma: float = Field(default=Config.CANNY_SIGMA, gt=0)
    canny_low: float = Field(default=Config.CANNY_LOW, ge=0)
    canny_high: float = Field(default=Config.CANNY_HIGH, gt=0)
    goal_low_fraction: float = Field(default=Config.CANNY_LOW_FRACTION, ge=0)
    goal_high_fraction: float = Field(default=Config.CANNY_HIGH_FRACTION, gt=0, le=1)
    disparity_canny_low: float = Field(default=Config.DISPARITY_CANNY_LOW, ge=0)
    disparity_canny_high: float = Field(default=Config.DISPARITY_CANNY_HIGH, gt=0)

    # Corners and candidates
    fast_threshold_terrain: float = Field(default=Config.FAST_THRESHOLD_TERRAIN, gt=0)
    fast_threshold_disparity: float = Field(default=Config.FAST_THRESHOLD_DISPARITY, gt=0)
    fast_arc_length: int = Field(default=Config.FAST_ARC_LENGTH, ge=9, le=16)
    nms_radius: int = Field(default=Config.CORNER_NMS_RADIUS, ge=1)
    corner_merge_radius: int = Field(default=Config.CORNER_MERGE_RADIUS, ge=1)
    tolerance: float = Field(default=Config.CANDIDATE_TOLERANCE, ge=0)
    candidate_cap: int = Field(default=Config.CANDIDATE_CAP, ge=1)
    candidate_spacing: float = Field(default=Config.CANDIDATE_SPACING, ge=0)
    standoff_margin: float = Field(default=Config.STANDOFF_MARGIN, ge=0)
    depth_check: bool = True

    # Hough lines
    hough_rho_res: float = Field(default=Config.HOUGH_RHO_RES, gt=0)
    hough_theta_res_deg: float = Field(default=Config.HOUGH_THETA_RES_DEG, gt=0)
    hough_vote_threshold: int = Field(default=Config.HOUGH_VOTE_THRESHOLD, ge=1)
    hough_max_gap: float = Field(default=Config.HOUGH_MAX_GAP, gt=0)
    split_factor: float = Field(default=Config.SEGMENT_SPLIT_FACTOR, ge=1)

    # Goal circle
    circle_r_min: int = Field(default=Config.CIRCLE_R_MIN, ge=1)
    circle_r_max: int = Field(default=Config.CIRCLE_R_MAX, ge=1)
    circle_sensitivity: float = Field(default=Config.CIRCLE_SENSITIVITY, gt=0, le=1)

    # Marker
    marker_window: int = Field(default=Config.MARKER_THRESHOLD_WINDOW, ge=3)
    marker_offset: float = Config.MARKER_THRESHOLD_OFFSET
    marker_approx_tolerance: float = Field(default=Config.MARKER_APPROX_TOLERANCE, gt=0)
    marker_min_area: float = Field(default=Config.MARKER_MIN_AREA, gt=0)
    dictionary_seed: int = Config.MARKER_DICTIONARY_SEED

    # Vehicle
    vehicle_length: float = Field(default=Config.VEHICLE_LENGTH, gt=0)
    vehicle_width: float = Field(default=Config.VEHICLE_WIDTH, gt=0)

    # Baselines
    cell_size: int = Field(default=Config.GRID_CELL_SIZE, ge=1)
    prm_samples: int = Field(default=Config.PRM_SAMPLES, ge=2)
    prm_neighbors: int = Field(default=Config.PRM_NEIGHBORS, ge=1)
    prm_seed: int = Config.PRM_SEED

    @model_validator(mode="after")
    def check_ranges(self):
        if self.canny_low >= self.canny_high:
            raise ValueError("canny_low must be below canny_high")
        if self.goal_low_fraction >= self.goal_high_fraction:
            raise ValueError("goal_low_fraction must be below goal_high_fraction")
        if self.disparity_canny_low >= self.disparity_canny_high:
            raise ValueError("disparity_canny_low must be below disparity_canny_high")
        if self.circle_r_min >= self.circle_r_max:
            raise ValueError("circle_r_min must be below circle_r_max")
        if self.vehicle_length < self.vehicle_width:
            raise ValueError("vehicle_length must be >= vehicle_width")
        return self

    @property
    def vehicle(self) -> VehicleSpec:
        return VehicleSpec(length=self.vehicle_length, width=self.vehicle_width)

    @property
    def prm(self) -> PrmConfig:
        return PrmConfig(self.prm_samples, self.prm_neighbors, self.prm_seed)

    def updated(self, values: Mapping[str, object]) -> "PipelineConfig":
        """Copy with ``values`` applied; None values are ignored."""
        merged = self.model_dump()
        merged.update({k: v for k, v in values.items() if v is not None})
        return build_config(merged)


def build_config(values: Mapping[str, object]) -> PipelineConfig:
    try:
        return PipelineConfig(**values)
    except ValidationError as e:
        raise InvalidConfig(f"Invalid pipeline configuration: {e}") from e


def load_pipeline_config(path: Optional[Union[str, Path]] = None,
                         overrides: Optional[Mapping[str, object]] = None) -> PipelineConfig:
    """
    Config defaults, then the key-value file at ``path``, then ``overrides``.

    Args:
        path: Optional config file (``key = value`` lines)
        overrides: Values from command-line flags; None entries are skipped

    Returns:
        Validated PipelineConfig
    """
    cfg = PipelineConfig()
    if path is not None:
        top, blocks = load_keyvalue(path)
        if blocks:
            raise InvalidConfig(f"Config file {path} must not contain [section] blocks")
        cfg = cfg.updated(top)
        logger.info(f"Loaded {len(top)} settings from {path}")
    if overrides:
        cfg = cfg.updated(overrides)
    return cfg


@lru_cache(maxsize=8)
def marker_dictionary(seed: int) -> MarkerDictionary:
    return MarkerDictionary.generate(count=Config.MARKER_DICTIONARY_SIZE, grid=Config.MARKER_GRID, seed=seed)


class PathPlanningPipeline:
    """Runs the detection stages and one of the planners on a stereo pair."""

    def __init__(self, cfg: Optional[PipelineConfig] = None):
        """Initialize the pipeline."""
        self.cfg = cfg or PipelineConfig()
        self.dictionary = marker_dictionary(self.cfg.dictionary_seed)
        self.detector = MarkerDetector(
            self.dictionary,
            window=self.cfg.marker_window,
            offset=self.cfg.marker_offset,
            approx_tolerance=self.cfg.marker_approx_tolerance,
            min_area=self.cfg.marker_min_area,
        )

    def assemble_scene(self, left: GrayImage, right: GrayImage,
                       vehicle: Optional[VehicleSpec] = None) -> PlanningScene:
        """
        Build the planning scene from a rectified stereo pair.

        Args:
            left: Left (terrain) image
            right: Right image
            vehicle: Vehicle footprint (default from the config)

        Returns:
            PlanningScene with obstacles, corners, start and goal
        """
        cfg = self.cfg
        vehicle = vehicle or cfg.vehicle
        shape = (left.height, left.width)
        times: Dict[str, float] = {}

        # Step 1: Disparity map
        began = time.perf_counter()
        disparity = block_match(left, right, cfg.window, cfg.omega, cfg.uniqueness)
        invalid = 1.0 - valid_fraction(disparity)
        if invalid > cfg.max_invalid:
            raise StereoFailure(f"{invalid:.1%} of disparity pixels invalid (limit {cfg.max_invalid:.0%})")
        raster = disparity_raster(disparity)
        times["stereo"] = time.perf_counter() - began

        # Step 2: Initial point from the marker
        began = time.perf_counter()
        pose = self.detector.detect(left)
        cell = pose.side / (self.dictionary.grid + 2)
        ignore = marker_mask(pose, shape, pad=cell + 4)
        start = initial_point(pose, disparity)
        times["marker"] = time.perf_counter() - began

        # Step 3: Desired point from the goal circle
        began = time.perf_counter()
        circle = find_goal_circle(
            left, cfg.circle_r_min, cfg.circle_r_max, cfg.circle_sensitivity,
            sigma=cfg.canny_sigma, low_fraction=cfg.goal_low_fraction,
            high_fraction=cfg.goal_high_fraction, ignore=ignore,
        )
        goal_value = sample_disparity(disparity, *circle.center)
        goal = FeaturePoint(circle.center[0], circle.center[1], goal_value)
        ignore |= circle_mask(circle, shape, pad=4)
        times["goal"] = time.perf_counter() - began

        # Step 4: Edge maps of the terrain image and the disparity raster
        began = time.perf_counter()
        terrain_edges = EdgeMap(canny(left, cfg.canny_sigma, cfg.canny_low, cfg.canny_high).on & ~ignore)
        disparity_edges = EdgeMap(
            canny(raster, cfg.canny_sigma, cfg.disparity_canny_low, cfg.disparity_canny_high).on & ~ignore
        )
        times["edges"] = time.perf_counter() - began

        # Step 5: Obstacle segments
        began = time.perf_counter()
        hough_cfg = HoughLineConfig.for_vehicle(
            vehicle, cfg.split_factor,
            rho_res=cfg.hough_rho_res,
            theta_res=math.radians(cfg.hough_theta_res_deg),
            vote_threshold=cfg.hough_vote_threshold,
            max_gap=cfg.hough_max_gap,
        )
        merge_radius = min(vehicle.length, vehicle.width) / 2
        terrain_segments = hough_segments(terrain_edges, hough_cfg)
        disparity_segments = hough_segments(disparity_edges, hough_cfg)
        terrain_obstacles = merge_nodes(terrain_segments, merge_radius)
        obstacles = merge_nodes(terrain_segments + disparity_segments, merge_radius)
        times["hough"] = time.perf_counter() - began

        # Step 6: Corners of both rasters
        began = time.perf_counter()
        terrain_corners = fast_detect(left, cfg.fast_threshold_terrain, cfg.fast_arc_length, CornerSource.TERRAIN)
        disparity_corners = fast_detect(
            raster, cfg.fast_threshold_disparity, cfg.fast_arc_length, CornerSource.DISPARITY
        )
        terrain_corners = nms_corners(suppress_regions(terrain_corners, ignore), cfg.nms_radius)
        disparity_corners = nms_corners(suppress_regions(disparity_corners, ignore), cfg.nms_radius)
        corners = merge_corner_sources(terrain_corners, disparity_corners, cfg.corner_merge_radius)
        times["corners"] = time.perf_counter() - began

        logger.info(
            f"Scene assembled: {len(obstacles)} obstacle segments ({len(terrain_obstacles)} from intensity), "
            f"{len(terrain_corners)} terrain + {len(disparity_corners)} disparity corners, "
            f"start {start.xy}, goal {goal.xy}"
        )
        scene = PlanningScene(
            terrain=left,
            disparity=disparity,
            obstacles=obstacles,
            start=start,
            goal=goal,
            vehicle=vehicle,
            corners=corners,
            terrain_obstacles=terrain_obstacles,
            disparity_raster=raster,
            marker=pose,
            goal_circle=circle,
            stage_times=times,
        )

        # Step 7: Distance to off-ground terrain for the depth check
        if cfg.depth_check:
            began = time.perf_counter()
            scene.ground_clearance(cfg.tolerance)
            times["ground"] = time.perf_counter() - began
        return scene

    def plan_scene(self, scene: PlanningScene, algorithm: str = "proposed") -> PlanResult:
        """Run one planner on an assembled scene."""
        cfg = self.cfg
        if algorithm == "proposed":
            return plan_scene(
                scene, cfg.tolerance, cfg.standoff_margin, cfg.candidate_cap, cfg.depth_check, cfg.candidate_spacing
            )
        if algorithm not in ALGORITHMS:
            raise InvalidConfig(f"Unknown algorithm {algorithm!r}; choose one of {', '.join(ALGORITHMS)}")

        grid = rasterize(scene, cfg.cell_size)
        start, goal = grid.cell_of(scene.start.xy), grid.cell_of(scene.goal.xy)
        if algorithm == "astar":
            return astar(grid, start, goal)
        return prm(grid, cfg.prm, start, goal)

    def plan(self, left: GrayImage, right: GrayImage, algorithm: str = "proposed",
             vehicle: Optional[VehicleSpec] = None) -> PlanResult:
        scene = self.assemble_scene(left, right, vehicle)
        return self.plan_scene(scene, algorithm)

    def process(self, left: GrayImage, right: GrayImage, algorithm: str = "proposed") -> Dict:
        """
        Plan and report the outcome as a result dictionary.

        Returns:
            Dictionary with 'success', 'error', 'exit_code', 'scene' and 'result'
        """
        result = {
            'success': False,
            'error': None,
            'exit_code': Config.EXIT_INPUT_ERROR,
            'scene': None,
            'result': None,
        }

        try:
            scene = self.assemble_scene(left, right)
            result['scene'] = scene
            result['result'] = self.plan_scene(scene, algorithm)
            result['success'] = True
            result['exit_code'] = Config.EXIT_OK

        except Exception as e:
            logger.error(f"Planning with {algorithm} failed: {e}")
            result['error'] = str(e)
            result['exit_code'] = getattr(e, 'exit_code', Config.EXIT_INPUT_ERROR)

        return result


def assemble_scene(left: GrayImage, right: GrayImage, vehicle: Optional[VehicleSpec] = None,
                   cfg: Optional[PipelineConfig] = None) -> PlanningScene:
    return PathPlanningPipeline(cfg).assemble_scene(left, right, vehicle)


def plan(left: GrayImage, right: GrayImage, vehicle: Optional[VehicleSpec] = None,
         cfg: Optional[PipelineConfig] = None, algorithm: str = "proposed") -> PlanResult:
    """assemble_scene, build_graph and shortest_path in one call."""
    return PathPlanningPipeline(cfg).plan(left, right, algorithm, vehicle)
