"""Tests for the Canny edge detector."""

import numpy as np
import pytest

from services.edge_service import (
    canny,
    canny_relative,
    edges_to_image,
    gaussian_kernel_1d,
    non_maximum_suppression,
    sobel,
)
from utils.errors import BadThresholds, NonPositiveSigma


def step_image(width=40, height=30, column=20, low=50.0, high=200.0):
    raster = np.full((height, width), low)
    raster[:, column:] = high
    return raster


def test_vertical_step_gives_one_pixel_wide_line():
    edges = canny(step_image(), sigma=1.0, low=20, high=60)
    rows = edges.on[5:25]
    assert (rows.sum(axis=1) == 1).all()
    columns = np.nonzero(rows)[1]
    assert set(columns) <= {19, 20}
    assert len(set(columns)) == 1


def test_constant_image_has_no_edges():
    assert canny(np.full((20, 20), 90.0), 1.4, 10, 30).count == 0
    assert canny_relative(np.full((20, 20), 90.0), 1.4, 0.1, 0.3).count == 0


def test_thresholds_must_be_ordered():
    with pytest.raises(BadThresholds):
        canny(step_image(), 1.0, 60, 20)
    with pytest.raises(BadThresholds):
        canny_relative(step_image(), 1.0, 0.3, 0.3)


def test_sigma_must_be_positive():
    with pytest.raises(NonPositiveSigma):
        gaussian_kernel_1d(0.0)
    with pytest.raises(NonPositiveSigma):
        canny(step_image(), -1.0, 10, 20)


def test_kernel_is_normalized_with_three_sigma_radius():
    kernel = gaussian_kernel_1d(1.4)
    assert kernel.size == 2 * 5 + 1
    assert kernel.sum() == pytest.approx(1.0)


def test_weak_pixels_survive_only_when_connected():
    raster = step_image(high=120.0)
    raster[:15, 20:] = 220.0  # upper half strong, lower half weak
    connected = canny(raster, 1.0, 20, 300)
    assert connected.on[2:12].any()
    assert connected.on[20:28].any()

    isolated = step_image(high=120.0)
    assert canny(isolated, 1.0, 20, 1e6).count == 0


def test_two_pixel_plateau_keeps_one_pixel():
    raster = np.zeros((9, 12))
    raster[:, 6:] = 100.0
    gradient = sobel(raster)
    kept = non_maximum_suppression(gradient)
    assert (kept[3:6].sum(axis=1) == 1).all()


def test_relative_thresholds_track_the_peak():
    absolute = canny(step_image(), 1.4, 0.1 * 1, 1000)
    relative = canny_relative(step_image(), 1.4, 0.1, 0.3)
    assert absolute.count == 0
    assert relative.count > 0


def test_edges_render_as_white():
    edges = canny(step_image(), 1.0, 20, 60)
    image = edges_to_image(edges)
    assert set(np.unique(image.data)) <= {0, 255}
    assert int((image.data == 255).sum()) == edges.count


@pytest.fixture
def blotches(rng):
    """Smoothed random blobs: many curved edges, no exact gradient ties."""
    noise = rng.uniform(0, 255, size=(60, 80))
    coarse = np.kron(noise[::6, ::6], np.ones((6, 6)))[:60, :80]
    return 0.7 * coarse + 0.3 * noise


@pytest.mark.parametrize("flip", [np.fliplr, np.flipud])
def test_mirrored_image_gives_mirrored_edges(blotches, flip):
    edges = canny(blotches, 1.4, 15, 40)
    mirrored = canny(flip(blotches), 1.4, 15, 40)
    assert edges.count > 0
    assert np.array_equal(mirrored.on, flip(edges.on))


def test_lower_weak_threshold_only_adds_edges(blotches):
    previous = None
    for low in (35, 25, 15, 5):
        edges = canny(blotches, 1.4, low, 40).on
        if previous is not None:
            assert not (previous & ~edges).any()
        previous = edges


def test_higher_strong_threshold_only_removes_edges(blotches):
    previous = None
    for high in (20, 40, 80, 160):
        edges = canny(blotches, 1.4, 10, high).on
        if previous is not None:
            assert not (edges & ~previous).any()
        previous = edges
