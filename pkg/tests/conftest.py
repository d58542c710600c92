"""Shared fixtures for the test suite."""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from services.feature_service import FeaturePoint  # noqa: E402
from services.planner_service import PlanningScene, VehicleSpec  # noqa: E402
from services.scene_service import GoalSpec, MarkerSpec, ObstacleKind, ObstacleSpec, SceneSpec  # noqa: E402
from services.stereo_service import DisparityMap  # noqa: E402
from utils.image_utils import GrayImage  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def textured(rng):
    """Random 8-bit texture, 120 x 160."""
    return GrayImage(rng.integers(0, 256, size=(120, 160)))


def shifted_pair(left: GrayImage, shift: int):
    """Right image = left moved ``shift`` pixels towards x = 0, padded with the edge column."""
    data = left.data
    right = np.empty_like(data)
    right[:, :data.shape[1] - shift] = data[:, shift:]
    right[:, data.shape[1] - shift:] = data[:, -1:]
    return left, GrayImage(right)


@pytest.fixture
def flat_disparity():
    """Constant disparity 15 over 200 x 200."""
    return DisparityMap(d=np.full((200, 200), 15, dtype=np.int16), omega=50, window=11)


def make_scene(obstacles=(), start=(20, 100), goal=(180, 100), size=(200, 200), corners=(),
               vehicle=None, raster=None, terrain_obstacles=None) -> PlanningScene:
    """Hand-built planning scene on flat ground (disparity 15)."""
    height, width = size
    disparity = DisparityMap(d=np.full((height, width), 15, dtype=np.int16), omega=50, window=11)
    return PlanningScene(
        terrain=GrayImage(np.full((height, width), 128)),
        disparity=disparity,
        obstacles=list(obstacles),
        start=FeaturePoint(start[0], start[1], 15.0),
        goal=FeaturePoint(goal[0], goal[1], 15.0),
        vehicle=vehicle or VehicleSpec(length=20, width=10),
        corners=list(corners),
        terrain_obstacles=list(obstacles if terrain_obstacles is None else terrain_obstacles),
        disparity_raster=raster if raster is not None else np.full((height, width), 15.0),
    )


@pytest.fixture
def empty_spec():
    """Empty ground with a marker and a goal circle."""
    return SceneSpec(
        name="empty", width=400, height=300, texture_seed=11,
        marker=MarkerSpec(x=70, y=150, id=2), goal=GoalSpec(x=330, y=150, radius=20),
    )


@pytest.fixture
def box_spec():
    """One box between the marker and the goal."""
    return SceneSpec(
        name="box", width=400, height=300, texture_seed=12,
        marker=MarkerSpec(x=70, y=150, id=2), goal=GoalSpec(x=330, y=150, radius=20),
        obstacles=[ObstacleSpec(kind=ObstacleKind.BOX, x=170, y=100, width=60, height=100, elevation=5.0)],
    )
