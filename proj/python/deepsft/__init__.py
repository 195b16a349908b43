"""Deformable surface reconstruction from a single RGB image.

Thin wrapper over the compiled core. Cameras, configs and reports are plain
dicts; rasters are numpy arrays (h, w) or (h, w, c), float32.
"""

from __future__ import annotations

import json
import os
from typing import Any, Mapping

import torch  # noqa: F401  loads the libtorch shared libraries the extension links against

from . import _core
from ._core import (
    INPUT_HEIGHT,
    INPUT_WIDTH,
    REFERENCE_FPS,
    ConfigError,
    DomainError,
    IoError,
    Model,
    NumericalError,
    RangeError,
    ShapeError,
    embed,
    rmse_depth_mm,
    rmse_registration_px,
    segmentation_iou,
)

__all__ = [
    "INPUT_HEIGHT",
    "INPUT_WIDTH",
    "REFERENCE_FPS",
    "ConfigError",
    "DomainError",
    "IoError",
    "Model",
    "NumericalError",
    "RangeError",
    "ShapeError",
    "adapt_image",
    "benchmark",
    "compute_adaptation",
    "default_training_camera",
    "embed",
    "evaluate",
    "export_rgbd",
    "finetune_stage2",
    "generate_dataset",
    "ingest_rgbd",
    "kinect_v2_native",
    "load_frame",
    "load_manifest",
    "project_point",
    "realsense_d435_native",
    "reconstruct",
    "rmse_depth_mm",
    "rmse_registration_px",
    "segmentation_iou",
    "synthetic_loss",
    "train_stage1",
    "write_template",
]

Camera = Mapping[str, Any]


def _dump(value: Mapping[str, Any] | None) -> str:
    return json.dumps(dict(value or {}))


def kinect_v2_native() -> dict:
    return json.loads(_core.kinect_v2_native())


def realsense_d435_native() -> dict:
    return json.loads(_core.realsense_d435_native())


def default_training_camera() -> dict:
    return json.loads(_core.default_training_camera())


def project_point(point, camera: Camera) -> tuple[float, float]:
    x, y, z = point
    return _core.project_point(float(x), float(y), float(z), _dump(camera))


def write_template(kind: str, out: os.PathLike | str) -> None:
    """Write the builtin ``sheet`` or ``tube`` template to a directory."""
    _core.write_template(kind, os.fspath(out))


def generate_dataset(template_dir, out, config: Mapping[str, Any] | None = None) -> dict:
    return json.loads(_core.generate_dataset(os.fspath(template_dir), os.fspath(out), _dump(config)))


def load_manifest(dataset) -> dict:
    return json.loads(_core.load_manifest(os.fspath(dataset)))


def load_frame(dataset, index: int) -> dict:
    return _core.load_frame(os.fspath(dataset), index)


def export_rgbd(dataset, out, depth_unit: str = "mm", depth_format: str = "png") -> None:
    _core.export_rgbd(os.fspath(dataset), os.fspath(out), depth_unit, depth_format)


def ingest_rgbd(input_dir, out, val_fraction: float = 0.1, test_fraction: float = 0.1) -> dict:
    return json.loads(_core.ingest_rgbd(os.fspath(input_dir), os.fspath(out), val_fraction, test_fraction))


def train_stage1(model: Model, dataset, config: Mapping[str, Any] | None = None) -> dict:
    return json.loads(_core.train_stage1(model, os.fspath(dataset), _dump(config)))


def finetune_stage2(model: Model, dataset, config: Mapping[str, Any] | None = None) -> dict:
    return json.loads(_core.finetune_stage2(model, os.fspath(dataset), _dump(config)))


def synthetic_loss(model: Model, dataset, split: str = "train") -> dict:
    return json.loads(_core.synthetic_loss(model, os.fspath(dataset), split))


def reconstruct(model: Model, image, camera: Camera | None = None) -> dict:
    """Points (N, 3) in mm, mask, depth and warp for one (270, 480, 3) image."""
    return _core.reconstruct(model, image, json.dumps(dict(camera)) if camera else "")


def compute_adaptation(source_native: Camera, new_camera: Camera) -> dict:
    return json.loads(_core.compute_adaptation(_dump(source_native), _dump(new_camera)))


def adapt_image(image, source_native: Camera, new_camera: Camera):
    return _core.adapt_image(image, _dump(source_native), _dump(new_camera))


def evaluate(model: Model, dataset, split: str = "test", atlas_to_px: float = 0.0) -> dict:
    return json.loads(_core.evaluate(model, os.fspath(dataset), split, atlas_to_px))


def benchmark(model: Model, frames: int = 10, warmup: int = 2) -> dict:
    return json.loads(_core.benchmark(model, frames, warmup))
