"""Tests for block matching and disparity utilities."""

import numpy as np
import pandas as pd
import pytest

from services.stereo_service import (
    INVALID,
    DisparityMap,
    StereoRig,
    block_match,
    colormap_table,
    depth_from_disparity,
    disparity_levels,
    disparity_raster,
    disparity_to_color,
    effective_window,
    sample_disparity,
    save_disparity,
)
from tests.conftest import shifted_pair
from utils.errors import BadWindow, DimensionMismatch, ZeroDisparity
from utils.image_utils import GrayImage, load_pnm


@pytest.mark.parametrize("shift", [0, 4, 7])
def test_uniform_shift_is_recovered(textured, shift):
    left, right = shifted_pair(textured, shift)
    disparity = block_match(left, right, window=5, omega=16)
    valid = disparity.valid
    assert valid.mean() > 0.5
    assert (disparity.d[valid] == shift).all()


def test_unsupported_columns_are_invalid(textured):
    left, right = shifted_pair(textured, 5)
    disparity = block_match(left, right, window=5, omega=16)
    assert (disparity.d[:, :18] == INVALID).all()
    assert (disparity.d[:2] == INVALID).all()


def test_disparity_never_exceeds_omega(rng):
    left = GrayImage(rng.integers(0, 256, size=(60, 80)))
    right = GrayImage(rng.integers(0, 256, size=(60, 80)))
    disparity = block_match(left, right, window=5, omega=12, uniqueness=1.0)
    values = disparity.d[disparity.valid]
    assert values.min() >= 0 and values.max() <= 12


def test_dimension_mismatch_raises(textured):
    with pytest.raises(DimensionMismatch):
        block_match(textured, GrayImage(textured.data[:, :-1].copy()), window=5, omega=8)


def test_window_validation(textured):
    assert effective_window(4) == 5
    assert effective_window(7) == 7
    with pytest.raises(BadWindow):
        effective_window(0)
    with pytest.raises(BadWindow):
        block_match(textured, textured, window=201, omega=8)

    left, right = shifted_pair(textured, 3)
    assert block_match(left, right, window=4, omega=8).window == 5


def test_depth_inverts_disparity():
    rig = StereoRig(focal=500, half_baseline=0.15)
    assert depth_from_disparity(15, rig) == pytest.approx(10.0)
    for depth in (3.0, 10.0, 17.0):
        assert depth_from_disparity(rig.disparity_at_depth(depth), rig) == pytest.approx(depth)
    with pytest.raises(ZeroDisparity):
        depth_from_disparity(0, rig)


def test_levels_and_colors():
    disparity = DisparityMap(d=np.array([[INVALID, 0, 10, 20]], dtype=np.int16), omega=20, window=5)
    assert disparity_levels(disparity).tolist() == [[0, 0, 128, 255]]

    table = colormap_table()
    assert table.shape == (256, 3) and table.dtype == np.uint8
    colors = disparity_to_color(disparity).data
    assert colors[0, 0].tolist() == [0, 0, 0]
    assert colors[0, 3].tolist() == table[255].tolist()


def test_raster_fills_holes_from_the_farther_side():
    d = np.array([[15, INVALID, INVALID, 20], [INVALID, INVALID, INVALID, INVALID]], dtype=np.int16)
    raster = disparity_raster(DisparityMap(d=d, omega=30, window=5), median_size=1)
    assert raster.tolist() == [[15.0, 15.0, 15.0, 20.0], [15.0, 15.0, 15.0, 20.0]]

    empty = DisparityMap(d=np.full((3, 3), INVALID, dtype=np.int16), omega=30, window=5)
    assert (disparity_raster(empty) == 0).all()


def test_sample_falls_back_to_neighbourhood_median():
    d = np.full((11, 11), 12, dtype=np.int16)
    d[5, 5] = INVALID
    disparity = DisparityMap(d=d, omega=30, window=5)
    assert sample_disparity(disparity, 5, 5) == 12.0
    assert sample_disparity(disparity, 0, 0) == 12.0

    d[:] = INVALID
    assert sample_disparity(disparity, 5, 5) is None


def test_save_disparity_writes_image_and_table(tmp_path):
    d = np.array([[INVALID, 3], [6, INVALID]], dtype=np.int16)
    save_disparity(DisparityMap(d=d, omega=6, window=3), tmp_path / "pair")

    image = load_pnm(tmp_path / "pair.pgm")
    assert image.data.tolist() == [[0, 128], [255, 0]]
    table = pd.read_csv(tmp_path / "pair.csv")
    assert table.to_dict("records") == [{"x": 1, "y": 0, "d": 3}, {"x": 0, "y": 1, "d": 6}]
