"""Services package initialization."""

from .processing_pipeline import PathPlanningPipeline, PipelineConfig
from .export_service import ExportService

__all__ = ["PathPlanningPipeline", "PipelineConfig", "ExportService"]
