"""``bench`` command: median-of-N planner timings over the presets."""

import logging
from pathlib import Path

from config import Config
from modules.common import add_pipeline_arguments, cli_errors, pipeline_config, resolve_scene
from services.bench_service import run_bench
from services.export_service import ExportService
from services.processing_pipeline import ALGORITHMS
from services.scene_service import preset_scenes
from utils.keyvalue_utils import parse_list

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("bench", help="time the planners on scene presets")
    parser.add_argument("--presets", default=None, help="comma-separated preset indices, names or spec files")
    parser.add_argument("--algorithms", default=",".join(ALGORITHMS))
    parser.add_argument("--repetitions", type=int, default=Config.BENCH_REPETITIONS)
    parser.add_argument("--out", type=Path, default=Config.OUTPUT_DIR / "bench.csv")
    parser.add_argument("--parallel", action="store_true", help="run cells in worker processes")
    parser.add_argument("--workers", type=int, default=None)
    add_pipeline_arguments(parser)
    parser.set_defaults(handler=run)


@cli_errors
def run(args) -> int:
    specs = preset_scenes() if args.presets is None else [resolve_scene(v) for v in parse_list(args.presets, str)]
    algorithms = parse_list(args.algorithms, str)

    report = run_bench(specs, algorithms, args.repetitions, pipeline_config(args), args.parallel, args.workers)

    args.out.parent.mkdir(parents=True, exist_ok=True)
    summary = report.summary()
    ExportService.write_csv(summary, args.out)
    ExportService.write_csv(report.runs_frame(), args.out.with_name(f"{args.out.stem}_runs.csv"))

    print(summary.to_string(index=False))
    print(f"# {report.repetitions} repetitions; parallel={report.parallel}; {report.environment}")
    return Config.EXIT_OK
