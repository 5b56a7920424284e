"""Procedurally rendered stick-figure dataset."""

import logging
import math
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
from PIL import Image, ImageDraw

from lowres_pose.data.dataset import ANNOTATIONS_FILE, Dataset, ImageRecord, save_annotations
from lowres_pose.data.images import write_pgm
from lowres_pose.schemas.pose import KeypointSchema, PoseInstance, stick_figure_schema

logger = logging.getLogger(__name__)

# Keypoints stay this many pixels inside the image border.
MARGIN = 2
NOISE_SIGMA = 10.0


def _direction(angle: float) -> np.ndarray:
    return np.array([math.cos(angle), math.sin(angle)])


def _limb(
    start: np.ndarray, angle: float, bend: float, lengths: Tuple[float, float]
) -> Tuple[np.ndarray, np.ndarray]:
    joint = start + lengths[0] * _direction(angle)
    end = joint + lengths[1] * _direction(angle + bend)
    return joint, end


def sample_figure(rng: np.random.Generator) -> Dict[str, np.ndarray | float]:
    """Joint positions of one figure around the origin.

    The person's left limbs point toward +x, so left and right stay
    distinguishable by geometry alone.
    """
    lean = rng.uniform(-0.25, 0.25)
    down = np.array([math.sin(lean), math.cos(lean)])
    torso = rng.uniform(10.0, 15.0)
    head_r = rng.uniform(3.0, 4.5)
    neck = np.zeros(2)
    hip = neck + torso * down
    head = neck - (head_r + 1.0) * down
    shoulder = neck + 2.0 * down

    parts: Dict[str, np.ndarray | float] = {
        "head": head,
        "neck": neck,
        "hip": hip,
        "shoulder": shoulder,
        "head_r": head_r,
    }
    for side, sign in (("left", 1.0), ("right", -1.0)):
        arm = (rng.uniform(4.5, 7.5), rng.uniform(4.5, 7.5))
        angle = math.radians(rng.uniform(-60.0, 60.0))
        bend = math.radians(rng.uniform(-30.0, 30.0))
        elbow, hand = _limb(shoulder, angle, bend, arm)
        leg = (rng.uniform(5.0, 8.0), rng.uniform(5.0, 8.0))
        # measured from straight down, outward positive
        spread = math.radians(rng.uniform(5.0, 35.0))
        knee_bend = math.radians(rng.uniform(-15.0, 15.0))
        knee, foot = _limb(hip, math.pi / 2 - spread, knee_bend, leg)
        if sign < 0:
            elbow, hand = _mirror(shoulder, elbow), _mirror(shoulder, hand)
            knee, foot = _mirror(hip, knee), _mirror(hip, foot)
        parts.update(
            {
                f"{side}_elbow": elbow,
                f"{side}_hand": hand,
                f"{side}_knee": knee,
                f"{side}_foot": foot,
            }
        )
    return parts


def _mirror(origin: np.ndarray, point: np.ndarray) -> np.ndarray:
    return np.array([2.0 * origin[0] - point[0], point[1]])


def _translate(parts: Dict[str, np.ndarray | float], offset: np.ndarray) -> None:
    for key, value in parts.items():
        if isinstance(value, np.ndarray):
            parts[key] = value + offset


def _extent_bounds(parts: Dict[str, np.ndarray | float]) -> Tuple[np.ndarray, np.ndarray]:
    points = np.stack([v for v in parts.values() if isinstance(v, np.ndarray)])
    r = float(parts["head_r"])
    lo = np.minimum(points.min(axis=0), np.asarray(parts["head"]) - r)
    hi = np.maximum(points.max(axis=0), np.asarray(parts["head"]) + r)
    return lo, hi


def render_figure(
    parts: Dict[str, np.ndarray | float],
    extent: Tuple[int, int],
    rng: np.random.Generator,
) -> np.ndarray:
    """(H, W) uint8 rendering with a noisy background."""
    h, w = extent
    background = int(rng.integers(10, 60))
    ink = int(rng.integers(190, 256))
    img = Image.new("L", (w, h), color=background)
    draw = ImageDraw.Draw(img)

    def seg(a: str, b: str) -> None:
        pa, pb = parts[a], parts[b]
        draw.line([tuple(pa), tuple(pb)], fill=ink, width=2)

    seg("neck", "hip")
    for side in ("left", "right"):
        seg("shoulder", f"{side}_elbow")
        seg(f"{side}_elbow", f"{side}_hand")
        seg("hip", f"{side}_knee")
        seg(f"{side}_knee", f"{side}_foot")
    cx, cy = parts["head"]
    r = float(parts["head_r"])
    draw.ellipse([cx - r, cy - r, cx + r, cy + r], outline=ink, width=2)

    pixels = np.asarray(img, dtype=np.float64)
    pixels = pixels + rng.normal(0.0, NOISE_SIGMA, size=pixels.shape)
    return np.clip(np.rint(pixels), 0, 255).astype(np.uint8)


def sample_instance(
    rng: np.random.Generator, extent: Tuple[int, int], schema: KeypointSchema
) -> Tuple[PoseInstance, Dict[str, np.ndarray | float]]:
    """Place a random figure fully inside the image and describe it."""
    h, w = extent
    parts = sample_figure(rng)
    lo, hi = _extent_bounds(parts)
    low = np.array([MARGIN, MARGIN]) - lo
    high = np.array([w - 1 - MARGIN, h - 1 - MARGIN]) - hi
    if np.any(high < low):
        raise ValueError(f"Image extent {extent} too small for a stick figure")
    _translate(parts, rng.uniform(low, high))
    lo, hi = _extent_bounds(parts)

    coords = np.stack([np.asarray(parts[name]) for name in schema.names])
    bw, bh = hi - lo
    instance = PoseInstance.from_arrays(
        coords,
        np.full(len(schema.names), 2),
        bbox=(float(lo[0]), float(lo[1]), float(bw), float(bh)),
        area=float(bw * bh),
        head_size=2.0 * float(parts["head_r"]),
    )
    return instance, parts


def gen_synthetic_dataset(
    count: int,
    extent: Tuple[int, int] = (64, 64),
    schema: Optional[KeypointSchema] = None,
    seed: int = 0,
    out_dir: str | Path = "./data/synthetic/train",
) -> Dataset:
    """Render ``count`` stick figures as PGM images plus an annotation file.

    The same seed reproduces every byte.
    """
    if count <= 0:
        raise ValueError(f"count must be positive, got {count}")
    schema = schema or stick_figure_schema()
    missing = [n for n in schema.names if n not in _PART_NAMES]
    if missing:
        raise ValueError(f"Stick figures have no keypoints named {missing}")
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    images, annotations = [], []
    for i in range(count):
        instance, parts = sample_instance(rng, extent, schema)
        pixels = render_figure(parts, extent, rng)
        file_name = f"images/{i:06d}.pgm"
        write_pgm(pixels, out_dir / file_name)
        images.append(
            ImageRecord(id=i + 1, file_name=file_name, width=extent[1], height=extent[0])
        )
        annotations.append(instance.model_copy(update={"image_id": i + 1}))
    dataset = Dataset(
        images=images, annotations=annotations, keypoint_schema=schema, root=str(out_dir)
    )
    save_annotations(dataset, out_dir / ANNOTATIONS_FILE)
    logger.info("Generated %d synthetic images in %s (seed %d)", count, out_dir, seed)
    return dataset


_PART_NAMES = {
    "head",
    "neck",
    "hip",
    "shoulder",
    "left_elbow",
    "left_hand",
    "left_knee",
    "left_foot",
    "right_elbow",
    "right_hand",
    "right_knee",
    "right_foot",
}
