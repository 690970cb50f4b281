"""Aerial multi-pedestrian tracking: synthetic data, training, tracking and CLEAR-MOT evaluation."""

from ._core import (
    ConfigError,
    FormatError,
    IoError,
    Network,
    TrainingError,
    evaluate,
    ground_truth_boxes,
    iou,
    load_annotations,
    point_to_box,
    report_columns,
    run_cli,
    synthesize,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "IoError",
    "Network",
    "TrainingError",
    "evaluate",
    "ground_truth_boxes",
    "iou",
    "load_annotations",
    "point_to_box",
    "report_columns",
    "run_cli",
    "synthesize",
]
