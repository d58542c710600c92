"""Tests for the benchmark harness."""

import math

import pytest

from services import bench_service
from services.bench_service import BenchReport, run_bench, time_algorithm
from services.scene_service import find_preset, preset_scenes
from utils.errors import InvalidConfig, NoPath, NotFound


class FailingPipeline:
    def plan_scene(self, scene, algorithm):
        raise NoPath("walled in")


def test_repetitions_below_three_are_rejected(empty_spec):
    with pytest.raises(InvalidConfig):
        run_bench([empty_spec], repetitions=2)


def test_unknown_algorithm_is_rejected(empty_spec):
    with pytest.raises(InvalidConfig):
        run_bench([empty_spec], ["proposed", "dstar"], repetitions=3)


def test_failed_repetitions_are_recorded():
    rows = time_algorithm(FailingPipeline(), None, "walled", "proposed", 3)
    assert [row["repetition"] for row in rows] == [0, 1, 2]
    assert not any(row["success"] for row in rows)
    assert rows[0]["error"] == "walled in"


def test_scene_failure_marks_every_algorithm(monkeypatch, empty_spec):
    def broken(spec, pipeline):
        raise NotFound("no marker")

    monkeypatch.setattr(bench_service, "_assemble", broken)
    report = run_bench([empty_spec], ["proposed", "astar"], repetitions=3)

    assert len(report.rows) == 6
    summary = report.summary()
    assert summary["success"].tolist() == [False, False]
    assert summary["median_s"].isna().all()


def test_summary_statistics():
    report = BenchReport(rows=[
        {"scene": "s", "algorithm": "astar", "repetition": k, "elapsed_s": t, "length_px": 10.0,
         "success": True, "error": None}
        for k, t in enumerate([0.3, 0.1, 0.2])
    ], repetitions=3)
    row = report.summary().iloc[0]
    assert row["median_s"] == pytest.approx(0.2)
    assert (row["min_s"], row["max_s"]) == (0.1, 0.3)
    assert row["length_px"] == 10.0 and row["success"]


@pytest.mark.slow
def test_bench_times_every_cell(empty_spec):
    report = run_bench([empty_spec], ["proposed", "astar"], repetitions=3)
    assert len(report.rows) == 6
    runs = report.runs_frame()
    assert runs["success"].all()
    assert (runs["elapsed_s"] > 0).all()

    summary = report.summary()
    assert summary["algorithm"].tolist() == ["proposed", "astar"]
    assert not math.isnan(summary["median_s"].iloc[0])
    assert report.environment


@pytest.mark.slow
@pytest.mark.parametrize("name", [spec.name for spec in preset_scenes()])
def test_waypoint_planner_beats_the_grid_baselines(name):
    report = run_bench([find_preset(name)], repetitions=5)
    summary = report.summary().set_index("algorithm")
    assert summary["success"].all()

    median = summary["median_s"]
    assert median["proposed"] <= median["prm"]
    assert median["astar"] >= 10 * median["prm"]
