"""``scenegen`` command: render synthetic stereo scenes with ground truth."""

import logging
from pathlib import Path

from config import Config
from modules.common import cli_errors, resolve_scene
from services.processing_pipeline import marker_dictionary
from services.scene_service import dump_scene_spec, export_truth, preset_scenes, render_stereo
from utils.errors import InvalidConfig, IoFailure
from utils.image_utils import save_pnm

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("scenegen", help="render a preset or a scene spec file")
    parser.add_argument("scene", nargs="?", help="preset index or name, or a scene spec file")
    parser.add_argument("--out", type=Path, help="output prefix")
    parser.add_argument("--list", action="store_true", help="list the presets and exit")
    parser.add_argument("--dictionary", type=Path, help="also dump the marker dictionary here")
    parser.set_defaults(handler=run)


@cli_errors
def run(args) -> int:
    if args.list:
        for index, spec in enumerate(preset_scenes(), 1):
            print(f"{index}: {spec.name} {spec.width}x{spec.height}, {len(spec.obstacles)} obstacles")
        return Config.EXIT_OK

    if args.scene is None or args.out is None:
        raise InvalidConfig("scenegen needs a scene and --out")

    spec = resolve_scene(args.scene)
    dictionary = marker_dictionary(Config.MARKER_DICTIONARY_SEED)
    left, right, truth = render_stereo(spec, dictionary)

    prefix = args.out
    prefix.parent.mkdir(parents=True, exist_ok=True)
    save_pnm(left, prefix.with_name(f"{prefix.name}_left.pgm"))
    save_pnm(right, prefix.with_name(f"{prefix.name}_right.pgm"))
    try:
        prefix.with_name(f"{prefix.name}_scene.txt").write_text(dump_scene_spec(spec), encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot write scene spec: {e}") from e
    export_truth(truth, prefix)

    if args.dictionary is not None:
        dictionary.dump(args.dictionary)

    logger.info(f"Rendered {spec.name} to {prefix}_*")
    return Config.EXIT_OK
