"""Synthetic data, annotation IO and augmentation."""

from lowres_pose.data.augment import AugmentDraw, augment, sample_draw, warp_image, warp_instance
from lowres_pose.data.dataset import (
    ANNOTATIONS_FILE,
    Dataset,
    ImageRecord,
    load_annotations,
    save_annotations,
)
from lowres_pose.data.images import read_pgm, write_pgm
from lowres_pose.data.synthetic import gen_synthetic_dataset

__all__ = [
    "ANNOTATIONS_FILE",
    "AugmentDraw",
    "Dataset",
    "ImageRecord",
    "augment",
    "gen_synthetic_dataset",
    "load_annotations",
    "read_pgm",
    "sample_draw",
    "save_annotations",
    "warp_image",
    "warp_instance",
    "write_pgm",
]
