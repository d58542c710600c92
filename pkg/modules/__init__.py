"""Command modules; each exposes register(subparsers) and run(args)."""

from . import bench, detect, disparity, plan, scenegen

COMMANDS = [disparity, detect, plan, scenegen, bench]

__all__ = ["bench", "detect", "disparity", "plan", "scenegen", "COMMANDS"]
