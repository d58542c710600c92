"""Tests for Hough segments, node merging and circles."""

import math

import numpy as np
import pytest
from skimage.draw import circle_perimeter

from services.edge_service import EdgeMap
from services.hough_service import (
    HoughLineConfig,
    circle_coverage,
    hough_circles,
    hough_segments,
    merge_nodes,
    score_threshold,
    segments_to_frame,
    split_long_segments,
)
from services.planner_service import VehicleSpec
from utils.errors import BadRadii, InvalidConfig
from utils.geometry import LineSegment


def edge_map(shape, *pixels):
    on = np.zeros(shape, dtype=bool)
    for ys, xs in pixels:
        on[ys, xs] = True
    return EdgeMap(on)


def test_horizontal_run_becomes_one_segment():
    edges = edge_map((50, 100), (20, slice(10, 70)))
    segments = hough_segments(edges, HoughLineConfig())
    assert len(segments) == 1
    assert {segments[0].head, segments[0].tail} == {(10, 20), (69, 20)}
    assert segments[0].votes == 60


def test_gap_wider_than_max_gap_splits_the_run():
    edges = edge_map((50, 200), (20, slice(10, 60)), (20, slice(80, 130)))
    segments = hough_segments(edges, HoughLineConfig(max_gap=5))
    ends = sorted(tuple(sorted((s.head, s.tail))) for s in segments)
    assert ends == [((10, 20), (59, 20)), ((80, 20), (129, 20))]


def test_short_runs_are_dropped():
    edges = edge_map((50, 100), (20, slice(10, 45)))
    assert hough_segments(edges, HoughLineConfig(min_len=40)) == []


def test_box_outline_gives_four_sides():
    on = np.zeros((120, 120), dtype=bool)
    on[30, 30:91] = on[90, 30:91] = True
    on[30:91, 30] = on[30:91, 90] = True
    segments = merge_nodes(hough_segments(EdgeMap(on), HoughLineConfig()), merge_radius=5)
    assert len(segments) == 4
    nodes = {p for s in segments for p in (s.head, s.tail)}
    assert len(nodes) == 4
    for corner in [(30, 30), (90, 30), (30, 90), (90, 90)]:
        assert min(math.dist(corner, node) for node in nodes) <= 1.5


def test_empty_edge_map_has_no_segments():
    assert hough_segments(EdgeMap(np.zeros((20, 20), dtype=bool)), HoughLineConfig()) == []


def test_vehicle_config_derives_lengths():
    cfg = HoughLineConfig.for_vehicle(VehicleSpec(length=60, width=40))
    assert cfg.min_len == 40
    assert cfg.max_len == 240


def test_invalid_line_config_raises():
    with pytest.raises(InvalidConfig):
        HoughLineConfig(vote_threshold=0)
    with pytest.raises(InvalidConfig):
        HoughLineConfig(min_len=50, max_len=10)


def test_split_long_segments_gives_equal_pieces():
    pieces = split_long_segments([LineSegment((0, 0), (100, 0), 7)], max_len=30)
    assert [p.head for p in pieces] == [(0, 0), (25, 0), (50, 0), (75, 0)]
    assert pieces[-1].tail == (100, 0)
    assert all(p.length <= 30 and p.votes == 7 for p in pieces)


def test_merge_moves_close_endpoints_to_their_centroid():
    segments = [LineSegment((10, 10), (50, 10), 5), LineSegment((52, 12), (52, 60), 3)]
    merged = merge_nodes(segments, merge_radius=5)
    assert merged == [LineSegment((10, 10), (51, 11), 5), LineSegment((51, 11), (52, 60), 3)]


def test_merge_is_idempotent_and_zero_radius_is_identity(rng):
    segments = [
        LineSegment(tuple(rng.integers(0, 100, 2).tolist()), tuple(rng.integers(0, 100, 2).tolist()), 1)
        for _ in range(40)
    ]
    segments = [s for s in segments if not s.is_degenerate]
    once = merge_nodes(segments, 6)
    assert merge_nodes(once, 6) == once
    assert merge_nodes(segments, 0) == segments
    with pytest.raises(InvalidConfig):
        merge_nodes(segments, -1)


def test_merge_drops_collapsed_segments_and_duplicates():
    segments = [LineSegment((0, 0), (2, 1), 1), LineSegment((10, 0), (40, 0), 2), LineSegment((11, 1), (40, 1), 9)]
    merged = merge_nodes(segments, merge_radius=3)
    assert len(merged) == 1
    assert merged[0].votes == 9


def circle_edges(shape, a, b, r):
    on = np.zeros(shape, dtype=bool)
    rr, cc = circle_perimeter(b, a, r, shape=shape)
    on[rr, cc] = True
    return EdgeMap(on)


def test_drawn_circle_is_found_exactly():
    edges = circle_edges((100, 120), 60, 50, 20)
    [best, *_] = hough_circles(edges, 10, 40, 0.9)
    assert best.center == (60, 50)
    assert best.radius == 20
    assert best.score == pytest.approx(1.0)
    assert circle_coverage(edges, 60, 50, 20) == pytest.approx(1.0)


def test_two_circles_are_both_reported():
    on = circle_edges((120, 200), 50, 60, 15).on | circle_edges((120, 200), 140, 60, 30).on
    found = {(c.center, c.radius) for c in hough_circles(EdgeMap(on), 10, 40, 0.9)}
    assert ((50, 60), 15) in found
    assert ((140, 60), 30) in found


def test_straight_line_is_not_a_circle():
    edges = edge_map((100, 100), (50, slice(0, 100)))
    assert hough_circles(edges, 10, 40, 0.5) == []


def test_bad_radii_raise():
    edges = circle_edges((60, 60), 30, 30, 10)
    with pytest.raises(BadRadii):
        hough_circles(edges, 20, 20)
    with pytest.raises(BadRadii):
        hough_circles(edges, 0, 20)
    with pytest.raises(InvalidConfig):
        hough_circles(edges, 10, 20, sensitivity=1.5)


def test_score_threshold_follows_sensitivity():
    assert score_threshold(0.9) == pytest.approx(0.2)
    assert score_threshold(0.2) == pytest.approx(0.9)
    assert math.isclose(score_threshold(0.0), 1.0)


def test_segment_frame_columns():
    frame = segments_to_frame([LineSegment((1, 2), (3, 4), 5)])
    assert frame.values.tolist() == [[1, 2, 3, 4, 5]]


def test_half_turn_maps_segments_onto_themselves():
    on = np.zeros((100, 140), dtype=bool)
    on[20, 15:111] = on[75, 15:111] = True
    on[20:76, 15] = on[20:76, 110] = True
    on[35:65, 60] = True
    height, width = on.shape

    segments = hough_segments(EdgeMap(on), HoughLineConfig())
    turned = hough_segments(EdgeMap(np.rot90(on, 2)), HoughLineConfig())
    assert len(turned) == len(segments) == 5

    def half_turn(point):
        return width - 1 - point[0], height - 1 - point[1]

    for segment in segments:
        image = (half_turn(segment.head), half_turn(segment.tail))
        assert any(
            max(math.dist(image[0], other.head), math.dist(image[1], other.tail)) <= 1.5
            or max(math.dist(image[0], other.tail), math.dist(image[1], other.head)) <= 1.5
            for other in turned
        )


def test_reported_score_is_the_recomputed_coverage(rng):
    on = circle_edges((120, 160), 70, 60, 25).on
    on &= rng.random(on.shape) < 0.8
    on |= rng.random(on.shape) < 0.01
    edges = EdgeMap(on)
    detections = hough_circles(edges, 15, 35, 0.9)
    assert detections
    for detection in detections:
        recomputed = circle_coverage(edges, *detection.center, detection.radius)
        assert abs(recomputed - detection.score) <= 0.02
