"""Export service for plan tables, summaries and overlay images."""

import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import cv2
import numpy as np
import pandas as pd

from config import Config
from services.feature_service import CornerSource, FeaturePoint, candidates_to_frame
from services.planner_service import PlanningScene, PlanResult
from utils.errors import IoFailure
from utils.image_utils import RgbImage, save_pnm

logger = logging.getLogger(__name__)

MARKER_SIZE = 9


def _pt(point) -> tuple:
    return (int(round(point[0])), int(round(point[1])))


class ExportService:
    """Service for writing plan results."""

    @staticmethod
    def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> None:
        try:
            frame.to_csv(path, index=False)
        except OSError as e:
            raise IoFailure(f"Cannot write {path}: {e}") from e
        logger.debug(f"Wrote {len(frame)} rows to {path}")

    @staticmethod
    def export_waypoints(result: PlanResult, path: Union[str, Path]) -> None:
        """Waypoints CSV with header x,y."""
        ExportService.write_csv(result.to_frame(), path)

    @staticmethod
    def export_candidates(points: Sequence[FeaturePoint], path: Union[str, Path]) -> None:
        ExportService.write_csv(candidates_to_frame(points), path)

    @staticmethod
    def export_summary(result: PlanResult, path: Union[str, Path]) -> None:
        """One line: algorithm, then length_px, elapsed_s, candidates and edges."""
        try:
            Path(path).write_text(f"algorithm={result.algorithm},{result.summary_line()}\n", encoding="utf-8")
        except OSError as e:
            raise IoFailure(f"Cannot write {path}: {e}") from e

    @staticmethod
    def render_overlay(scene: PlanningScene, result: Optional[PlanResult] = None) -> RgbImage:
        """
        Draw the planning scene over the terrain image.

        Obstacle segments are red with red crosses on their endpoints,
        disparity corners red asterisks, terrain corners green plus signs,
        candidates green dots, the path blue, the start a blue square and
        the marker centroid a red dot.

        Args:
            scene: Assembled planning scene
            result: Optional plan to draw

        Returns:
            RgbImage overlay
        """
        colors = Config.OVERLAY_COLORS
        canvas = np.repeat(scene.terrain.data[:, :, None], 3, axis=2).copy()

        for segment in scene.obstacles:
            head, tail = _pt(segment.head), _pt(segment.tail)
            cv2.line(canvas, head, tail, colors["obstacle"], 2)
            for end in (head, tail):
                cv2.drawMarker(canvas, end, colors["obstacle"], cv2.MARKER_TILTED_CROSS, MARKER_SIZE, 1)

        for corner in scene.corners:
            if corner.source == CornerSource.DISPARITY:
                cv2.drawMarker(canvas, (corner.x, corner.y), colors["disparity_corner"], cv2.MARKER_STAR, MARKER_SIZE, 1)
            else:
                cv2.drawMarker(canvas, (corner.x, corner.y), colors["terrain_corner"], cv2.MARKER_CROSS, MARKER_SIZE, 1)

        if result is not None:
            for point in result.candidates:
                cv2.circle(canvas, point.xy, 3, colors["candidate"], -1)

            path = np.array([_pt(p) for p in result.waypoints], dtype=np.int32).reshape(-1, 1, 2)
            cv2.polylines(canvas, [path], False, colors["path"], 2)

        cv2.drawMarker(canvas, scene.start.xy, colors["start"], cv2.MARKER_SQUARE, 2 * MARKER_SIZE, 2)
        if scene.marker is not None:
            cv2.circle(canvas, _pt(scene.marker.center), 4, colors["marker"], -1)

        return RgbImage(canvas)

    @staticmethod
    def export_plan(scene: PlanningScene, result: PlanResult, prefix: Union[str, Path]) -> dict:
        """
        Write ``<prefix>_waypoints.csv``, ``<prefix>_summary.txt``,
        ``<prefix>_overlay.ppm`` and, for the proposed planner,
        ``<prefix>_candidates.csv``.

        Returns:
            Mapping of artifact name to path
        """
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        paths = {
            'waypoints': prefix.with_name(f"{prefix.name}_waypoints.csv"),
            'summary': prefix.with_name(f"{prefix.name}_summary.txt"),
            'overlay': prefix.with_name(f"{prefix.name}_overlay.ppm"),
        }

        ExportService.export_waypoints(result, paths['waypoints'])
        ExportService.export_summary(result, paths['summary'])
        save_pnm(ExportService.render_overlay(scene, result), paths['overlay'])

        if result.algorithm == "proposed":
            paths['candidates'] = prefix.with_name(f"{prefix.name}_candidates.csv")
            ExportService.export_candidates(result.candidates, paths['candidates'])

        logger.info(f"Exported {result.algorithm} plan to {prefix}_*")
        return paths
