"""End-to-end tests of the planning pipeline on rendered scenes."""

import math

import cv2
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import floyd_warshall
import numpy as np
import pytest

from services.processing_pipeline import (
    PathPlanningPipeline,
    PipelineConfig,
    load_pipeline_config,
    plan,
)
from services.planner_service import build_graph
from services.scene_service import find_preset, preset_scenes, render_stereo
from tests.conftest import make_scene
from utils.errors import InvalidConfig, NotFound
from utils.geometry import densify
from utils.image_utils import GrayImage


def signed_distances(waypoints, polygon) -> np.ndarray:
    """Distance of every densified path point to the polygon outline; negative inside."""
    contour = np.asarray(polygon, dtype=np.float32).reshape(-1, 1, 2)
    return np.array([-cv2.pointPolygonTest(contour, (float(x), float(y)), True) for x, y in densify(waypoints)])



def orientation(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def on_segment(p, q, r) -> bool:
    return min(p[0], q[0]) <= r[0] <= max(p[0], q[0]) and min(p[1], q[1]) <= r[1] <= max(p[1], q[1])


def point_to_segment(point, head, tail) -> float:
    dx, dy = tail[0] - head[0], tail[1] - head[1]
    denom = dx * dx + dy * dy
    t = 0.0 if denom == 0 else min(1.0, max(0.0, ((point[0] - head[0]) * dx + (point[1] - head[1]) * dy) / denom))
    return math.hypot(point[0] - head[0] - t * dx, point[1] - head[1] - t * dy)


def reference_distance(a, b, c, d) -> float:
    """Segment-to-segment distance from orientation tests and endpoint distances."""
    o1, o2, o3, o4 = orientation(a, b, c), orientation(a, b, d), orientation(c, d, a), orientation(c, d, b)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return 0.0
    if (o1 == 0 and on_segment(a, b, c)) or (o2 == 0 and on_segment(a, b, d)) \
            or (o3 == 0 and on_segment(c, d, a)) or (o4 == 0 and on_segment(c, d, b)):
        return 0.0
    return min(point_to_segment(c, a, b), point_to_segment(d, a, b),
               point_to_segment(a, c, d), point_to_segment(b, c, d))

@pytest.fixture(scope="module")
def pipeline():
    return PathPlanningPipeline()


@pytest.mark.slow
def test_empty_scene_goes_straight(pipeline, empty_spec):
    left, right, truth = render_stereo(empty_spec, pipeline.dictionary)
    scene = pipeline.assemble_scene(left, right)

    assert math.dist(scene.start.xy, truth.start) <= 2
    assert math.dist(scene.goal.xy, truth.goal) <= 2
    assert scene.start.value == pytest.approx(15, abs=1)
    assert set(scene.stage_times) == {"stereo", "marker", "goal", "edges", "hough", "corners", "ground"}

    result = pipeline.plan_scene(scene)
    assert result.waypoints[0] == scene.start.xy and result.waypoints[-1] == scene.goal.xy
    assert result.length <= 1.02 * math.dist(scene.start.xy, scene.goal.xy)


@pytest.mark.slow
def test_box_scene_detours_with_clearance(pipeline, box_spec):
    left, right, truth = render_stereo(box_spec, pipeline.dictionary)
    scene = pipeline.assemble_scene(left, right)
    assert scene.obstacles

    result = pipeline.plan_scene(scene)
    assert len(result.waypoints) >= 3
    assert signed_distances(result.waypoints, truth.obstacle_polygons[0]).min() > 15
    assert result.length > math.dist(scene.start.xy, scene.goal.xy)

    baseline = pipeline.plan_scene(scene, "astar")
    assert signed_distances(baseline.waypoints, truth.obstacle_polygons[0]).min() > 0


@pytest.mark.slow
def test_hidden_crater_is_avoided_only_with_depth(pipeline):
    spec = find_preset("hidden-crater")
    left, right, truth = render_stereo(spec, pipeline.dictionary)
    scene = pipeline.assemble_scene(left, right)
    crater = truth.obstacle_polygons[0]

    proposed = pipeline.plan_scene(scene)
    assert signed_distances(proposed.waypoints, crater).min() > 20

    blind = pipeline.plan_scene(scene, "astar")
    assert signed_distances(blind.waypoints, crater).min() < 0


@pytest.mark.slow
def test_missing_marker_raises(pipeline, empty_spec):
    left, right, _ = render_stereo(empty_spec, pipeline.dictionary)
    left_data, right_data = left.data.copy(), right.data.copy()
    left_data[100:200, 20:120] = 128
    right_data[100:200, 5:105] = 128

    with pytest.raises(NotFound):
        pipeline.assemble_scene(GrayImage(left_data), GrayImage(right_data))

    outcome = pipeline.process(GrayImage(left_data), GrayImage(right_data))
    assert not outcome['success']
    assert outcome['exit_code'] == 2
    assert outcome['result'] is None


@pytest.mark.slow
def test_module_level_plan(empty_spec):
    left, right, _ = render_stereo(empty_spec)
    result = plan(left, right, cfg=PipelineConfig(tolerance=2))
    assert result.algorithm == "proposed"
    assert len(result.waypoints) == 2


def test_unknown_algorithm_is_rejected(pipeline):
    with pytest.raises(InvalidConfig):
        pipeline.plan_scene(make_scene(), "rrt")


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "planner.cfg"
    path.write_text("omega = 48\ntolerance = 3  # disparity units\ndepth_check = false\n")

    cfg = load_pipeline_config(path, {"tolerance": 1.5, "window": None})
    assert cfg.omega == 48
    assert cfg.tolerance == 1.5
    assert cfg.window == PipelineConfig().window
    assert cfg.depth_check is False


@pytest.mark.parametrize("text", [
    "[stereo]\nomega = 48\n",
    "omega = 0\n",
    "canny_low = 80\n",
    "vehicle_width = 80\n",
    "circle_r_min = 20\ncircle_r_max = 20\n",
    "no_such_key = 1\n",
])
def test_bad_config_files(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(InvalidConfig):
        load_pipeline_config(path)


def test_config_views():
    cfg = PipelineConfig(vehicle_length=50, vehicle_width=30, prm_samples=100, prm_neighbors=5, prm_seed=3)
    assert cfg.vehicle.clearance == 15
    assert (cfg.prm.n_samples, cfg.prm.k_neighbors, cfg.prm.seed) == (100, 5, 3)


@pytest.mark.slow
@pytest.mark.parametrize("name", [spec.name for spec in preset_scenes()])
def test_preset_paths_are_clear_optimal_and_repeatable(name):
    pipeline = PathPlanningPipeline(PipelineConfig(candidate_cap=498))
    left, right, _ = render_stereo(find_preset(name), pipeline.dictionary)
    scene = pipeline.assemble_scene(left, right)
    cfg = pipeline.cfg

    graph = build_graph(scene, cfg.tolerance, cfg.standoff_margin, cfg.candidate_cap,
                        cfg.depth_check, cfg.candidate_spacing)
    result = pipeline.plan_scene(scene)
    assert pipeline.plan_scene(scene).waypoints == result.waypoints
    assert all(point in graph.nodes for point in result.waypoints)

    # Every leg keeps half the vehicle width from every obstacle segment
    clearance = scene.vehicle.clearance
    for head, tail in zip(result.waypoints, result.waypoints[1:]):
        for obstacle in scene.obstacles:
            if obstacle.is_degenerate:
                continue
            assert reference_distance(head, tail, obstacle.head, obstacle.tail) >= clearance - 1e-6

    # All-pairs shortest paths agree with the single-source search
    size = len(graph.nodes)
    assert size <= 500
    rows, cols, weights = zip(*graph.edges)
    matrix = coo_matrix((weights, (rows, cols)), shape=(size, size)).tocsr()
    distances = floyd_warshall(matrix, directed=False)
    assert result.length == pytest.approx(distances[0, 1], rel=1e-9)
