"""Argument helpers shared by the command modules."""

import functools
import logging
import sys
from pathlib import Path
from typing import Callable, Tuple

from services.processing_pipeline import PipelineConfig, load_pipeline_config
from services.fiducial_service import MarkerDictionary
from services.scene_service import SceneSpec, find_preset, load_scene_spec, render_stereo
from utils.errors import InvalidConfig, PathPlanningError
from utils.image_utils import GrayImage, RgbImage, load_pnm, to_gray

logger = logging.getLogger(__name__)

# (flag, type, PipelineConfig field)
PIPELINE_FLAGS = [
    ("--omega", int, "omega"),
    ("--window", int, "window"),
    ("--tolerance", float, "tolerance"),
    ("--cap", int, "candidate_cap"),
    ("--vehicle-length", float, "vehicle_length"),
    ("--vehicle-width", float, "vehicle_width"),
    ("--cell-size", int, "cell_size"),
    ("--prm-samples", int, "prm_samples"),
    ("--prm-neighbors", int, "prm_neighbors"),
    ("--seed", int, "prm_seed"),
]


def add_pipeline_arguments(parser) -> None:
    """Config file and per-run override flags; flags win over the file."""
    parser.add_argument("--config", type=Path, help="key = value file with pipeline settings")
    for flag, cast, dest in PIPELINE_FLAGS:
        parser.add_argument(flag, type=cast, dest=dest, default=None)
    parser.add_argument("--no-depth-check", dest="depth_check", action="store_false", default=None,
                        help="do not reject legs over off-ground terrain")


def pipeline_config(args) -> PipelineConfig:
    fields = [dest for _, _, dest in PIPELINE_FLAGS] + ["depth_check"]
    overrides = {name: getattr(args, name, None) for name in fields}
    return load_pipeline_config(getattr(args, "config", None), overrides)


def add_input_arguments(parser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--scene", help="preset index or name, or a scene spec file")
    source.add_argument("--left", type=Path, help="left image (PGM/PPM)")
    parser.add_argument("--right", type=Path, help="right image (PGM/PPM), with --left")


def resolve_scene(value: str) -> SceneSpec:
    """Scene spec file when ``value`` names one, otherwise a preset."""
    path = Path(value)
    if path.is_file():
        return load_scene_spec(path)
    return find_preset(value)


def load_gray(path: Path) -> GrayImage:
    image = load_pnm(path)
    if isinstance(image, RgbImage):
        return to_gray(image)
    return image


def load_pair(args) -> Tuple[GrayImage, GrayImage]:
    if args.right is None:
        raise InvalidConfig("--left needs --right")
    return load_gray(args.left), load_gray(args.right)


def input_pair(args, dictionary: MarkerDictionary) -> Tuple[GrayImage, GrayImage, str]:
    """Stereo pair and a scene label from --scene or --left/--right."""
    if args.scene is not None:
        spec = resolve_scene(args.scene)
        left, right, _ = render_stereo(spec, dictionary)
        return left, right, spec.name
    left, right = load_pair(args)
    return left, right, args.left.stem


def cli_errors(run: Callable[..., int]) -> Callable[..., int]:
    """Turn pipeline errors into their exit code and a message on standard error."""

    @functools.wraps(run)
    def wrapper(args) -> int:
        try:
            return run(args)
        except PathPlanningError as e:
            logger.error(f"{type(e).__name__}: {e}")
            print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
            return e.exit_code

    return wrapper
