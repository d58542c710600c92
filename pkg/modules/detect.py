"""``detect`` command: dump the detection stages of the pipeline."""

import logging
from pathlib import Path

from config import Config
from modules.common import add_input_arguments, add_pipeline_arguments, cli_errors, input_pair, pipeline_config
from services.edge_service import canny, edges_to_image
from services.export_service import ExportService
from services.feature_service import candidates_to_frame, corners_to_frame
from services.fiducial_service import format_pose
from services.hough_service import circles_to_frame, segments_to_frame
from services.processing_pipeline import PathPlanningPipeline
from utils.errors import IoFailure
from utils.image_utils import save_pnm

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("detect", help="dump marker, goal, corners, segments and edges")
    add_input_arguments(parser)
    parser.add_argument("--out", type=Path, required=True, help="output prefix")
    add_pipeline_arguments(parser)
    parser.set_defaults(handler=run)


@cli_errors
def run(args) -> int:
    cfg = pipeline_config(args)
    pipeline = PathPlanningPipeline(cfg)
    left, right, label = input_pair(args, pipeline.dictionary)
    scene = pipeline.assemble_scene(left, right)

    prefix = args.out
    prefix.parent.mkdir(parents=True, exist_ok=True)

    def target(suffix: str) -> Path:
        return prefix.with_name(f"{prefix.name}_{suffix}")

    try:
        target("marker.txt").write_text("id,cx,cy,yaw_deg\n" + format_pose(scene.marker) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot write marker pose: {e}") from e

    ExportService.write_csv(candidates_to_frame([scene.start, scene.goal]).assign(role=["start", "goal"]),
                            target("endpoints.csv"))
    ExportService.write_csv(corners_to_frame(scene.corners), target("corners.csv"))
    ExportService.write_csv(segments_to_frame(scene.obstacles), target("segments.csv"))
    ExportService.write_csv(circles_to_frame([scene.goal_circle]), target("circles.csv"))
    save_pnm(edges_to_image(canny(left, cfg.canny_sigma, cfg.canny_low, cfg.canny_high)), target("edges.pgm"))
    save_pnm(ExportService.render_overlay(scene), target("overlay.ppm"))

    print(f"{label}: marker {format_pose(scene.marker)}; goal {scene.goal.x},{scene.goal.y}; "
          f"{len(scene.corners)} corners; {len(scene.obstacles)} segments")
    return Config.EXIT_OK
