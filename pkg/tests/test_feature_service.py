"""Tests for FAST corners and candidate selection."""

import math

import numpy as np
import pytest

from services.feature_service import (
    BRESENHAM_RING,
    Corner,
    CornerSource,
    FeaturePoint,
    cap_candidates,
    candidates_to_frame,
    fast_detect,
    filter_candidates,
    harris_score,
    merge_corner_sources,
    nms_corners,
    standoff_corners,
    suppress_regions,
)
from services.stereo_service import INVALID, DisparityMap
from utils.errors import ImageTooSmall, InvalidConfig, StartGoalDisparityMismatch


def naive_segment_test(raster: np.ndarray, t: float, n: int) -> set:
    """Every pixel with some run of n contiguous ring pixels all brighter or all darker."""
    height, width = raster.shape
    found = set()
    for y in range(3, height - 3):
        for x in range(3, width - 3):
            center = raster[y, x]
            ring = [raster[y + dy, x + dx] for dx, dy in BRESENHAM_RING]
            for start in range(16):
                arc = [ring[(start + k) % 16] for k in range(n)]
                if all(v > center + t for v in arc) or all(v < center - t for v in arc):
                    found.add((x, y))
                    break
    return found


def square_image(size=40, lo=0, hi=255):
    raster = np.full((size, size), lo, dtype=float)
    raster[10:30, 10:30] = hi
    return raster


@pytest.mark.parametrize("t", [10, 30])
@pytest.mark.parametrize("n", [9, 12])
def test_detector_matches_naive_segment_test(t, n):
    rng = np.random.default_rng(100 * t + n)
    for _ in range(100):
        raster = rng.integers(0, 256, size=(32, 32)).astype(float)
        detected = {(c.x, c.y) for c in fast_detect(raster, t, n)}
        assert detected == naive_segment_test(raster, t, n)


def test_raising_the_threshold_only_removes_corners(rng):
    raster = rng.integers(0, 256, size=(48, 48)).astype(float)
    previous = None
    for t in (5, 15, 30, 60, 90):
        found = {(c.x, c.y) for c in fast_detect(raster, t, 9)}
        if previous is not None:
            assert found <= previous
        previous = found


def test_constant_offset_leaves_corners_unchanged(rng):
    raster = rng.integers(0, 200, size=(48, 48)).astype(float)
    base = [(c.x, c.y, c.score) for c in fast_detect(raster, 20, 9)]
    shifted = [(c.x, c.y, c.score) for c in fast_detect(raster + 37.0, 20, 9)]
    assert base
    assert shifted == base


def test_square_gives_four_corners_after_suppression():
    corners = nms_corners(fast_detect(square_image(), t=50, n=9), radius=3)
    assert len(corners) == 4
    for cx, cy in [(10, 10), (29, 10), (10, 29), (29, 29)]:
        assert any(max(abs(c.x - cx), abs(c.y - cy)) <= 2 for c in corners)


def test_square_corner_direction_points_out_of_the_square():
    corners = nms_corners(fast_detect(square_image(), t=50, n=9), radius=3)
    top_left = min(corners, key=lambda c: c.x + c.y)
    assert math.degrees(top_left.arc_direction) == pytest.approx(-135, abs=30)


def test_straight_edge_is_not_a_corner():
    raster = np.zeros((30, 30))
    raster[:, 15:] = 200
    assert fast_detect(raster, t=20, n=9) == []


def test_constant_image_has_no_corners():
    assert fast_detect(np.full((16, 16), 77.0), t=5, n=9) == []


def test_corners_carry_their_source():
    corners = fast_detect(square_image(), t=50, n=9, source=CornerSource.DISPARITY)
    assert corners and all(c.source == CornerSource.DISPARITY for c in corners)


@pytest.mark.parametrize("t, n", [(0, 12), (-3, 9), (10, 8), (10, 17)])
def test_invalid_parameters_raise(t, n):
    with pytest.raises(InvalidConfig):
        fast_detect(square_image(), t, n)


def test_tiny_image_raises():
    with pytest.raises(ImageTooSmall):
        fast_detect(np.zeros((6, 20)), 10, 9)


def test_nms_keeps_highest_score_then_row_major():
    corners = [Corner(5, 5, 10.0), Corner(6, 5, 20.0), Corner(20, 20, 5.0), Corner(21, 20, 5.0)]
    kept = nms_corners(corners, radius=2)
    assert [(c.x, c.y) for c in kept] == [(6, 5), (20, 20)]
    with pytest.raises(InvalidConfig):
        nms_corners(corners, radius=0)


def test_merge_sources_collapses_duplicates():
    terrain = [Corner(10, 10, 5.0, CornerSource.TERRAIN)]
    disparity = [Corner(11, 12, 9.0, CornerSource.DISPARITY), Corner(40, 40, 1.0, CornerSource.DISPARITY)]
    merged = merge_corner_sources(terrain, disparity, radius=2)
    assert [(c.x, c.y, c.source) for c in merged] == [
        (11, 12, CornerSource.DISPARITY), (40, 40, CornerSource.DISPARITY)
    ]


def test_standoff_moves_along_arc_direction():
    corner = Corner(50, 50, 1.0, arc_direction=-3 * math.pi / 4)
    [moved] = standoff_corners([corner], clearance=10, margin=2, width=100, height=100)
    assert (moved.x, moved.y) == (38, 38)


def test_standoff_drops_undirected_and_outside_corners():
    corners = [Corner(50, 50, 1.0), Corner(5, 5, 1.0, arc_direction=-3 * math.pi / 4)]
    assert standoff_corners(corners, clearance=10, margin=2, width=100, height=100) == []


def disparity_map(values):
    return DisparityMap(d=np.asarray(values, dtype=np.int16), omega=50, window=11)


def test_filter_keeps_ground_level_corners():
    d = np.full((20, 20), 15, dtype=np.int16)
    d[5, 5] = 30
    d[6, 6] = INVALID
    d[7, 7] = 17
    corners = [Corner(5, 5, 1.0), Corner(6, 6, 1.0), Corner(7, 7, 1.0), Corner(8, 8, 1.0)]
    start, goal = FeaturePoint(1, 1, 15.0), FeaturePoint(18, 18, 16.0)

    kept = filter_candidates(corners, disparity_map(d), start, goal, tol=3)
    assert [(p.x, p.y, p.value) for p in kept] == [(7, 7, 17.0), (8, 8, 15.0)]


def test_filter_rejects_mismatched_endpoints():
    d = np.full((20, 20), 15, dtype=np.int16)
    with pytest.raises(StartGoalDisparityMismatch):
        filter_candidates([], disparity_map(d), FeaturePoint(1, 1, 10.0), FeaturePoint(2, 2, 20.0), tol=3)
    with pytest.raises(StartGoalDisparityMismatch):
        filter_candidates([], disparity_map(d), FeaturePoint(1, 1, None), FeaturePoint(2, 2, 15.0), tol=3)


def test_cap_keeps_best_scores_in_row_major_order():
    points = [FeaturePoint(9, 1, 15.0, score=1.0), FeaturePoint(3, 2, 15.0, score=5.0),
              FeaturePoint(1, 1, 15.0, score=3.0)]
    assert [(p.x, p.y) for p in cap_candidates(points, 2)] == [(1, 1), (3, 2)]
    assert cap_candidates(points, 5) == points


def test_suppress_regions_drops_masked_corners():
    mask = np.zeros((10, 10), dtype=bool)
    mask[2:4, 2:4] = True
    kept = suppress_regions([Corner(2, 3, 1.0), Corner(5, 5, 1.0)], mask)
    assert [(c.x, c.y) for c in kept] == [(5, 5)]


def test_harris_score_is_zero_on_flat_and_positive_on_corner():
    assert not harris_score(np.full((20, 20), 100.0)).any()
    score = harris_score(square_image())
    assert score[10, 10] > score[20, 10]


def test_candidate_frame_columns():
    frame = candidates_to_frame([FeaturePoint(1, 2, 15.0, CornerSource.TERRAIN)])
    assert list(frame.columns) == ["x", "y", "value", "source"]
    assert frame.iloc[0]["source"] == "terrain_image"
