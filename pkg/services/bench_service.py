"""Timing benchmark of the three planners over scene presets."""

import logging
import platform
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import pandas as pd

from services.planner_service import PlanningScene
from services.processing_pipeline import ALGORITHMS, PathPlanningPipeline, PipelineConfig
from services.scene_service import SceneSpec, render_stereo
from utils.errors import InvalidConfig

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["scene", "algorithm", "median_s", "min_s", "max_s", "length_px", "success", "parallel"]
RUN_COLUMNS = ["scene", "algorithm", "repetition", "elapsed_s", "length_px", "success", "error"]


@dataclass
class BenchReport:
    """Per-repetition timing rows plus the environment they were taken in."""

    rows: List[Dict] = field(default_factory=list)
    repetitions: int = 0
    parallel: bool = False
    environment: str = ""

    def runs_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=RUN_COLUMNS)

    def summary(self) -> pd.DataFrame:
        """One row per (scene, algorithm) with median, min and max elapsed seconds."""
        records = []
        runs = self.runs_frame()
        for (scene, algorithm), group in runs.groupby(["scene", "algorithm"], sort=False):
            ok = group[group["success"]]
            success = len(ok) == len(group)
            records.append({
                "scene": scene,
                "algorithm": algorithm,
                "median_s": ok["elapsed_s"].median() if success else float("nan"),
                "min_s": ok["elapsed_s"].min() if success else float("nan"),
                "max_s": ok["elapsed_s"].max() if success else float("nan"),
                "length_px": ok["length_px"].iloc[0] if success else float("nan"),
                "success": success,
                "parallel": self.parallel,
            })
        return pd.DataFrame(records, columns=SUMMARY_COLUMNS)


def environment_note() -> str:
    return f"{platform.platform()}; python {platform.python_version()}; {platform.processor() or 'unknown cpu'}"


def _failed_rows(scene: str, algorithm: str, repetitions: int, error: str) -> List[Dict]:
    return [
        {"scene": scene, "algorithm": algorithm, "repetition": k, "elapsed_s": float("nan"),
         "length_px": float("nan"), "success": False, "error": error}
        for k in range(repetitions)
    ]


def time_algorithm(pipeline: PathPlanningPipeline, scene: PlanningScene, name: str, algorithm: str,
                   repetitions: int) -> List[Dict]:
    """
    Run one planner ``repetitions`` times on an assembled scene.

    Returns:
        List of run dictionaries with 'success' and 'error' per repetition
    """
    rows = []
    for k in range(repetitions):
        row = {"scene": name, "algorithm": algorithm, "repetition": k, "elapsed_s": float("nan"),
               "length_px": float("nan"), "success": False, "error": None}
        try:
            result = pipeline.plan_scene(scene, algorithm)
            row.update(elapsed_s=result.elapsed, length_px=result.length, success=True)
        except Exception as e:
            logger.error(f"{name}/{algorithm} repetition {k} failed: {e}")
            row["error"] = str(e)
        rows.append(row)

    times = [r["elapsed_s"] for r in rows if r["success"]]
    if times:
        logger.info(f"{name}/{algorithm}: median {statistics.median(times):.4f}s over {len(times)} runs")
    return rows


def _assemble(spec: SceneSpec, pipeline: PathPlanningPipeline) -> PlanningScene:
    left, right, _ = render_stereo(spec, pipeline.dictionary)
    return pipeline.assemble_scene(left, right)


def _bench_cell(spec_data: Dict, algorithm: str, repetitions: int, cfg_data: Dict) -> List[Dict]:
    """Worker for one (scene, algorithm) cell; renders and assembles its own scene."""
    spec = SceneSpec(**spec_data)
    pipeline = PathPlanningPipeline(PipelineConfig(**cfg_data))
    try:
        scene = _assemble(spec, pipeline)
    except Exception as e:
        return _failed_rows(spec.name, algorithm, repetitions, str(e))
    return time_algorithm(pipeline, scene, spec.name, algorithm, repetitions)


def run_bench(specs: Sequence[SceneSpec], algorithms: Sequence[str] = ALGORITHMS, repetitions: int = 5,
              cfg: Optional[PipelineConfig] = None, parallel: bool = False,
              max_workers: Optional[int] = None) -> BenchReport:
    """
    Time every (scene, algorithm) cell ``repetitions`` times.

    Failures are recorded as unsuccessful rows and the run continues.

    Args:
        specs: Scenes to render and plan on
        algorithms: Planner names
        repetitions: Runs per cell (>= 3)
        cfg: Pipeline configuration
        parallel: Run cells in worker processes
        max_workers: Process pool size

    Returns:
        BenchReport
    """
    if repetitions < 3:
        raise InvalidConfig(f"Benchmark needs at least 3 repetitions, got {repetitions}")
    unknown = [a for a in algorithms if a not in ALGORITHMS]
    if unknown:
        raise InvalidConfig(f"Unknown algorithms: {unknown}")

    cfg = cfg or PipelineConfig()
    report = BenchReport(repetitions=repetitions, parallel=parallel, environment=environment_note())

    if parallel:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            futures = [
                pool.submit(_bench_cell, spec.model_dump(), algorithm, repetitions, cfg.model_dump())
                for spec in specs
                for algorithm in algorithms
            ]
            for future in futures:
                report.rows.extend(future.result())
        return report

    pipeline = PathPlanningPipeline(cfg)
    for spec in specs:
        try:
            scene = _assemble(spec, pipeline)
        except Exception as e:
            logger.error(f"Scene {spec.name} could not be assembled: {e}")
            for algorithm in algorithms:
                report.rows.extend(_failed_rows(spec.name, algorithm, repetitions, str(e)))
            continue

        for algorithm in algorithms:
            report.rows.extend(time_algorithm(pipeline, scene, spec.name, algorithm, repetitions))

    return report
