"""``plan`` command: run one planner and export the path."""

import logging
from pathlib import Path

from config import Config
from modules.common import add_input_arguments, add_pipeline_arguments, cli_errors, input_pair, pipeline_config
from services.export_service import ExportService
from services.processing_pipeline import ALGORITHMS, PathPlanningPipeline

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("plan", help="plan a path from a stereo pair or a scene")
    add_input_arguments(parser)
    parser.add_argument("--algorithm", choices=ALGORITHMS, default="proposed")
    parser.add_argument("--out", type=Path, required=True, help="output prefix")
    add_pipeline_arguments(parser)
    parser.set_defaults(handler=run)


@cli_errors
def run(args) -> int:
    pipeline = PathPlanningPipeline(pipeline_config(args))
    left, right, label = input_pair(args, pipeline.dictionary)

    scene = pipeline.assemble_scene(left, right)
    timings = ", ".join(f"{stage} {seconds:.3f}s" for stage, seconds in scene.stage_times.items())
    logger.info(f"{label}: detection stages {timings}")

    result = pipeline.plan_scene(scene, args.algorithm)
    ExportService.export_plan(scene, result, args.out)

    print(f"algorithm={result.algorithm},{result.summary_line()}")
    return Config.EXIT_OK
