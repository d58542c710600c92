"""Tests for the corner way-point graph and its shortest path."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from services.feature_service import Corner, FeaturePoint
from services.planner_service import (
    PlanResult,
    VehicleSpec,
    WaypointGraph,
    build_graph,
    legs_near_off_ground,
    off_ground_distance,
    plan_scene,
    select_candidates,
    shortest_path,
)
from tests.conftest import make_scene
from utils.errors import NoPath, StartGoalDisparityMismatch
from utils.geometry import LineSegment, densify, segment_distance


def corner(x, y, direction_deg, score=10.0):
    return Corner(x, y, score, arc_direction=math.radians(direction_deg))


def random_scene(rng, n_corners=12, n_walls=4):
    corners = [corner(int(x), int(y), float(a)) for x, y, a in zip(
        rng.integers(20, 180, n_corners), rng.integers(20, 180, n_corners), rng.uniform(-180, 180, n_corners)
    )]
    walls = []
    while len(walls) < n_walls:
        head = tuple(int(v) for v in rng.integers(30, 170, 2))
        tail = tuple(int(v) for v in rng.integers(30, 170, 2))
        if head != tail:
            walls.append(LineSegment(head, tail))
    return make_scene(obstacles=walls, corners=corners)


def floyd_warshall(graph: WaypointGraph) -> np.ndarray:
    n = len(graph.nodes)
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for i, j, weight in graph.edges:
        dist[i, j] = dist[j, i] = min(dist[i, j], weight)
    for k in range(n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return dist


def test_free_scene_gives_complete_graph_and_direct_path():
    corners = [corner(60, 40, -90), corner(140, 160, 90), corner(100, 60, 0)]
    scene = make_scene(corners=corners)
    graph = build_graph(scene, tol=2)
    n = len(graph.nodes)
    assert n == 5
    assert len(graph.edges) == n * (n - 1) // 2

    result = shortest_path(graph)
    assert result.waypoints == [(20, 100), (180, 100)]
    assert result.length == pytest.approx(160.0)
    assert result.candidates_considered == 3
    assert result.graph_edges == len(graph.edges)


def test_wall_forces_a_detour_around_the_nearer_end():
    wall = LineSegment((100, 50), (100, 160))
    scene = make_scene(obstacles=[wall], corners=[corner(100, 50, -90), corner(100, 160, 90)])
    result = plan_scene(scene, tol=2, margin=8)
    assert result.waypoints == [(20, 100), (100, 32), (180, 100)]
    assert result.length == pytest.approx(2 * math.hypot(80, 68))
    assert (0, 1) not in build_graph(scene, tol=2).edge_set()


def test_edges_match_clearance_oracle(rng):
    for _ in range(5):
        scene = random_scene(rng)
        graph = build_graph(scene, tol=2, depth_check=False)
        clearance = scene.vehicle.clearance

        expected = set()
        for i in range(len(graph.nodes)):
            for j in range(i + 1, len(graph.nodes)):
                leg = LineSegment(graph.nodes[i], graph.nodes[j])
                if all(segment_distance(leg, wall) >= clearance for wall in scene.obstacles):
                    expected.add((i, j))
        assert graph.edge_set() == expected


def test_path_length_matches_all_pairs_oracle(rng):
    checked = 0
    for _ in range(10):
        graph = build_graph(random_scene(rng, n_corners=15, n_walls=6), tol=2)
        best = floyd_warshall(graph)[0, 1]
        if math.isinf(best):
            with pytest.raises(NoPath):
                shortest_path(graph)
            continue
        assert shortest_path(graph).length == pytest.approx(best)
        checked += 1
    assert checked > 0


def test_equal_lengths_prefer_fewer_hops_then_smaller_coordinates():
    graph = WaypointGraph(
        nodes=[(0, 0), (20, 0), (10, 0), (10, 10), (10, -10)],
        edges=[(0, 1, 20.0), (0, 2, 10.0), (2, 1, 10.0)],
        candidates=[],
    )
    assert shortest_path(graph).waypoints == [(0, 0), (20, 0)]

    graph = WaypointGraph(
        nodes=[(0, 0), (20, 0), (10, 10), (10, -10)],
        edges=[(0, 2, 10.0), (2, 1, 10.0), (0, 3, 10.0), (3, 1, 10.0)],
        candidates=[],
    )
    assert shortest_path(graph).waypoints == [(0, 0), (10, -10), (20, 0)]


def test_start_equal_to_goal_is_a_single_waypoint():
    result = plan_scene(make_scene(goal=(20, 100)), tol=2)
    assert result.waypoints == [(20, 100)]
    assert result.length == 0.0


def test_spanning_wall_has_no_path():
    scene = make_scene(obstacles=[LineSegment((100, 0), (100, 199))])
    with pytest.raises(NoPath):
        plan_scene(scene, tol=2)


def test_depth_check_rejects_legs_over_a_pit():
    raster = np.full((200, 200), 15.0)
    raster[:, 90:111] = 8.0
    scene = make_scene(raster=raster)

    assert build_graph(scene, tol=2).edges == []
    assert len(build_graph(scene, tol=2, depth_check=False).edges) == 1


def test_off_ground_distance_ignores_specks():
    raster = np.full((40, 60), 15.0)
    raster[10:20, 30:40] = 8.0
    raster[35, 5] = 30.0

    distance = off_ground_distance(raster, 15.0, 2.0, min_area=4)
    assert distance[15, 35] == 0.0
    assert distance[15, 25] == pytest.approx(5.0)
    assert distance[35, 5] > 20
    assert off_ground_distance(raster, 15.0, 2.0)[35, 5] == 0.0
    assert np.isinf(off_ground_distance(np.full((5, 5), 15.0), 15.0, 2.0)).all()


def test_legs_near_off_ground_uses_the_keep_out_radius():
    raster = np.full((100, 200), 15.0)
    raster[40:60, 90:110] = 8.0
    distance = off_ground_distance(raster, 15.0, 2.0)

    heads = np.array([[10, 50], [10, 30], [10, 5], [10, 95]], dtype=float)
    tails = np.array([[190, 50], [190, 30], [190, 5], [10, 95]], dtype=float)
    near = legs_near_off_ground(distance, heads, tails, radius=10)
    # Pit rim at y=40: the leg at y=30 passes 10 px away, the one at y=5 35 px
    assert near.tolist() == [True, True, False, False]
    assert legs_near_off_ground(distance, heads[:0], tails[:0], radius=10).size == 0


def test_depth_check_keeps_legs_clear_of_a_pit_by_the_ground_radius():
    raster = np.full((200, 200), 15.0)
    raster[60:140, 90:111] = 8.0
    corners = [corner(100, 60, -90), corner(100, 140, 90)]
    scene = make_scene(raster=raster, corners=corners)
    assert scene.ground_radius == 10

    graph = build_graph(scene, tol=2, margin=20)
    assert (0, 1) not in graph.edge_set()
    result = shortest_path(graph)
    pit = np.argwhere(np.abs(raster - 15.0) > 2)[:, ::-1]
    path = np.asarray(densify(result.waypoints))
    gaps = np.hypot(path[:, None, 0] - pit[None, :, 0], path[:, None, 1] - pit[None, :, 1])
    assert gaps.min() > scene.ground_radius


def test_candidates_inside_the_keep_out_band_are_dropped():
    raster = np.full((200, 200), 15.0)
    raster[90:111, 90:111] = 30.0
    scene = make_scene(raster=raster, corners=[corner(100, 60, -90), corner(100, 112, 90)])
    # Standoff of sqrt(2) * 5 lands 9 px below the block, inside the band
    graph = build_graph(scene, tol=2, margin=0)
    assert [p.xy for p in graph.candidates] == [(100, 53)]
    assert build_graph(scene, tol=2, margin=0, depth_check=False).candidates != graph.candidates


def test_spacing_thins_candidates():
    corners = [corner(60, 40, 90, score=1.0), corner(64, 40, 90, score=5.0), corner(120, 40, 90, score=2.0)]
    scene = make_scene(corners=corners)
    assert len(select_candidates(scene, tol=2, margin=0)) == 3
    assert [p.xy for p in select_candidates(scene, tol=2, margin=0, spacing=10)] == [(64, 47), (120, 47)]


def test_candidates_skip_endpoints_and_off_ground_points():
    raster_scene = make_scene(corners=[corner(13, 100, 0), corner(60, 60, 0), corner(60, 60, 180)])
    raster_scene.disparity.d[60, 53] = 30
    candidates = select_candidates(raster_scene, tol=2, margin=0)
    assert [p.xy for p in candidates] == [(67, 60)]
    assert candidates[0].value == 15.0


def test_candidate_cap_keeps_best_scores():
    corners = [corner(40 + 10 * k, 40, 90, score=float(k)) for k in range(10)]
    candidates = select_candidates(make_scene(corners=corners), tol=2, cap=3)
    assert [p.score for p in candidates] == [7.0, 8.0, 9.0]


def test_mismatched_endpoint_disparities_raise():
    scene = make_scene(corners=[corner(60, 60, 0)])
    scene.goal = FeaturePoint(180, 100, 30.0)
    with pytest.raises(StartGoalDisparityMismatch):
        build_graph(scene, tol=2)


def test_vehicle_validation():
    assert VehicleSpec().clearance == 20.0
    with pytest.raises(ValidationError):
        VehicleSpec(length=10, width=20)


def test_result_tables():
    result = PlanResult([(0, 0), (3, 4)], 5.0, 0.25, 7, 9)
    assert result.to_frame().values.tolist() == [[0, 0], [3, 4]]
    assert result.summary_line() == "length_px=5.000,elapsed_s=0.250000,candidates=7,edges=9"
