"""``disparity`` command: SAD block matching on a stereo pair."""

import logging
from pathlib import Path

from config import Config
from modules.common import cli_errors, load_pair
from services.stereo_service import block_match, disparity_to_color, save_disparity, valid_fraction
from utils.image_utils import save_pnm

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("disparity", help="compute a disparity map from a rectified pair")
    parser.add_argument("--left", type=Path, required=True)
    parser.add_argument("--right", type=Path, required=True)
    parser.add_argument("--omega", type=int, default=Config.STEREO_OMEGA, help="maximum disparity")
    parser.add_argument("--window", type=int, default=Config.STEREO_WINDOW, help="block size")
    parser.add_argument("--uniqueness", type=float, default=Config.STEREO_UNIQUENESS)
    parser.add_argument("--out", type=Path, required=True, help="output prefix (.pgm and .csv are added)")
    parser.add_argument("--color", action="store_true", help="also write <out>_color.ppm")
    parser.set_defaults(handler=run)


@cli_errors
def run(args) -> int:
    left, right = load_pair(args)
    disparity = block_match(left, right, args.window, args.omega, args.uniqueness)

    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_disparity(disparity, args.out)
    if args.color:
        save_pnm(disparity_to_color(disparity), args.out.with_name(f"{args.out.name}_color.ppm"))

    print(f"valid_fraction={valid_fraction(disparity):.4f}")
    return Config.EXIT_OK
