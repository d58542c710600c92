"""Configuration management for the path planning toolkit."""

import os
from pathlib import Path
from typing import List

from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env_float(name: str, default: float) -> float:
    return float(os.getenv(name, str(default)))


def _env_int(name: str, default: int) -> int:
    return int(os.getenv(name, str(default)))


class Config:
    """Application configuration."""

    # Application settings
    APP_NAME: str = os.getenv("APP_NAME", "Stereo Waypoint Planner")
    APP_VERSION: str = os.getenv("APP_VERSION", "1.0.0")
    DEBUG: bool = os.getenv("DEBUG", "False").lower() == "true"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    # Paths
    BASE_DIR: Path = Path(__file__).parent
    OUTPUT_DIR: Path = BASE_DIR / os.getenv("OUTPUT_DIR", "output")

    # Stereo block matching
    STEREO_OMEGA: int = _env_int("STEREO_OMEGA", 50)
    STEREO_WINDOW: int = _env_int("STEREO_WINDOW", 10)
    STEREO_UNIQUENESS: float = _env_float("STEREO_UNIQUENESS", 0.95)
    STEREO_MAX_INVALID: float = _env_float("STEREO_MAX_INVALID", 0.9)

    # Edge detection
    CANNY_SIGMA: float = _env_float("CANNY_SIGMA", 1.4)
    CANNY_LOW: float = _env_float("CANNY_LOW", 30.0)
    CANNY_HIGH: float = _env_float("CANNY_HIGH", 60.0)
    CANNY_LOW_FRACTION: float = _env_float("CANNY_LOW_FRACTION", 0.1)
    CANNY_HIGH_FRACTION: float = _env_float("CANNY_HIGH_FRACTION", 0.3)
    DISPARITY_CANNY_LOW: float = _env_float("DISPARITY_CANNY_LOW", 3.0)
    DISPARITY_CANNY_HIGH: float = _env_float("DISPARITY_CANNY_HIGH", 6.0)

    # Corner detection and candidate selection
    FAST_THRESHOLD_TERRAIN: float = _env_float("FAST_THRESHOLD_TERRAIN", 20)
    FAST_THRESHOLD_DISPARITY: float = _env_float("FAST_THRESHOLD_DISPARITY", 5)
    FAST_ARC_LENGTH: int = _env_int("FAST_ARC_LENGTH", 9)
    CORNER_NMS_RADIUS: int = _env_int("CORNER_NMS_RADIUS", 3)
    CORNER_MERGE_RADIUS: int = 2
    CANDIDATE_TOLERANCE: float = _env_float("CANDIDATE_TOLERANCE", 3)
    CANDIDATE_CAP: int = _env_int("CANDIDATE_CAP", 500)
    CANDIDATE_SPACING: float = _env_float("CANDIDATE_SPACING", 10)
    STANDOFF_MARGIN: float = _env_float("STANDOFF_MARGIN", 14)

    # Hough lines
    HOUGH_RHO_RES: float = _env_float("HOUGH_RHO_RES", 1.0)
    HOUGH_THETA_RES_DEG: float = _env_float("HOUGH_THETA_RES_DEG", 1.0)
    HOUGH_VOTE_THRESHOLD: int = _env_int("HOUGH_VOTE_THRESHOLD", 30)
    HOUGH_MAX_GAP: float = _env_float("HOUGH_MAX_GAP", 5)
    SEGMENT_SPLIT_FACTOR: float = 4.0  # x longer vehicle dimension

    # Goal circle detection (R_max = 40, R_min = 10, Sensitivity = 0.9)
    CIRCLE_R_MIN: int = _env_int("CIRCLE_R_MIN", 10)
    CIRCLE_R_MAX: int = _env_int("CIRCLE_R_MAX", 40)
    CIRCLE_SENSITIVITY: float = _env_float("CIRCLE_SENSITIVITY", 0.9)

    # Marker detection
    MARKER_THRESHOLD_WINDOW: int = _env_int("MARKER_THRESHOLD_WINDOW", 15)
    MARKER_THRESHOLD_OFFSET: float = _env_float("MARKER_THRESHOLD_OFFSET", 7)
    MARKER_APPROX_TOLERANCE: float = _env_float("MARKER_APPROX_TOLERANCE", 0.03)
    MARKER_MIN_AREA: float = _env_float("MARKER_MIN_AREA", 100)
    MARKER_DICTIONARY_SEED: int = _env_int("MARKER_DICTIONARY_SEED", 1)
    MARKER_DICTIONARY_SIZE: int = 16
    MARKER_GRID: int = 4

    # Vehicle footprint in pixels
    VEHICLE_LENGTH: float = _env_float("VEHICLE_LENGTH", 60)
    VEHICLE_WIDTH: float = _env_float("VEHICLE_WIDTH", 40)

    # Baseline planners
    GRID_CELL_SIZE: int = _env_int("GRID_CELL_SIZE", 1)
    PRM_SAMPLES: int = _env_int("PRM_SAMPLES", 300)
    PRM_NEIGHBORS: int = _env_int("PRM_NEIGHBORS", 10)
    PRM_SEED: int = _env_int("PRM_SEED", 42)

    # Benchmark harness
    BENCH_REPETITIONS: int = _env_int("BENCH_REPETITIONS", 5)
    ALGORITHMS: List[str] = ["proposed", "astar", "prm"]

    # Exit codes of the command line surface
    EXIT_OK = 0
    EXIT_INPUT_ERROR = 2
    EXIT_NO_PATH = 3

    # Overlay colors (RGB): obstacles red, candidates green, path blue
    OVERLAY_COLORS = {
        "obstacle": (255, 0, 0),
        "disparity_corner": (255, 0, 0),
        "terrain_corner": (0, 200, 0),
        "candidate": (0, 255, 0),
        "path": (0, 0, 255),
        "start": (0, 0, 255),
        "marker": (255, 0, 0),
    }

    @classmethod
    def create_directories(cls):
        """Create the output directory if it doesn't exist."""
        cls.OUTPUT_DIR.mkdir(parents=True, exist_ok=True)

    @classmethod
    def validate(cls):
        """Validate configuration."""
        errors = []

        if cls.STEREO_OMEGA < 1:
            errors.append("STEREO_OMEGA must be >= 1")

        if cls.STEREO_WINDOW < 2:
            errors.append("STEREO_WINDOW must be >= 2")

        if not 0 <= cls.CANNY_LOW < cls.CANNY_HIGH:
            errors.append("CANNY_LOW must be below CANNY_HIGH")

        if not 0 <= cls.CANNY_LOW_FRACTION < cls.CANNY_HIGH_FRACTION:
            errors.append("CANNY_LOW_FRACTION must be below CANNY_HIGH_FRACTION")

        if not 9 <= cls.FAST_ARC_LENGTH <= 16:
            errors.append("FAST_ARC_LENGTH must be within [9, 16]")

        if not 0 < cls.CIRCLE_R_MIN < cls.CIRCLE_R_MAX:
            errors.append("CIRCLE_R_MIN must be positive and below CIRCLE_R_MAX")

        if cls.VEHICLE_LENGTH < cls.VEHICLE_WIDTH or cls.VEHICLE_WIDTH <= 0:
            errors.append("VEHICLE_LENGTH must be >= VEHICLE_WIDTH > 0")

        if errors:
            raise ValueError(f"Configuration errors: {', '.join(errors)}")

        return True
