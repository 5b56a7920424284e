"""Random affine augmentation of an image and its keypoints.

Keypoint coordinates put pixel centres on integers; Pillow puts them on
half-integers, so coordinates are shifted by 0.5 on the way in and out.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from PIL import Image

from lowres_pose.schemas.pose import KeypointSchema, PoseInstance
from lowres_pose.schemas.training import AugmentConfig

ROTATION_PROB = 0.6


@dataclass(frozen=True)
class AugmentDraw:
    """One sampled transform: isotropic scale, rotation in degrees, mirror."""

    scale: float = 1.0
    rotation: float = 0.0
    flip: bool = False

    @property
    def is_identity(self) -> bool:
        return self.scale == 1.0 and self.rotation == 0.0 and not self.flip


def sample_draw(config: AugmentConfig, rng: np.random.Generator) -> AugmentDraw:
    """Draw scale, rotation and flip; always consumes four variates when enabled."""
    if not config.enabled:
        return AugmentDraw()
    z_scale, z_rot = rng.standard_normal(2)
    u_rot, u_flip = rng.random(2)
    r = config.scale_range
    scale = float(np.clip(1.0 + z_scale * r, 1.0 - r, 1.0 + r))
    rot_range = config.rotation_range
    rotation = 0.0
    if u_rot < ROTATION_PROB:
        rotation = float(np.clip(z_rot * rot_range, -rot_range, rot_range))
    return AugmentDraw(scale=scale, rotation=rotation, flip=bool(u_flip < config.flip_prob))


def forward_matrix(draw: AugmentDraw, extent: Tuple[int, int]) -> np.ndarray:
    """2x3 map from source to augmented Pillow coordinates, about the image centre."""
    h, w = extent
    theta = np.deg2rad(draw.rotation)
    c, s = np.cos(theta), np.sin(theta)
    linear = draw.scale * np.array([[c, -s], [s, c]])
    if draw.flip:
        linear = np.diag([-1.0, 1.0]) @ linear
    centre = np.array([w / 2.0, h / 2.0])
    return np.hstack([linear, (centre - linear @ centre)[:, None]])


def warp_image(pixels: np.ndarray, draw: AugmentDraw) -> np.ndarray:
    """Apply the draw to an (H, W) uint8 image with bilinear resampling."""
    if draw.is_identity:
        return pixels.copy()
    img = Image.fromarray(np.asarray(pixels, dtype=np.uint8))
    if draw.scale == 1.0 and draw.rotation == 0.0:
        out = img.transpose(Image.Transpose.FLIP_LEFT_RIGHT)
    else:
        m = forward_matrix(draw, pixels.shape)
        inv_linear = np.linalg.inv(m[:, :2])
        inv_offset = -inv_linear @ m[:, 2]
        data = (*inv_linear[0], inv_offset[0], *inv_linear[1], inv_offset[1])
        out = img.transform(
            img.size,
            Image.Transform.AFFINE,
            data=tuple(float(v) for v in data),
            resample=Image.Resampling.BILINEAR,
            fillcolor=0,
        )
    return np.asarray(out, dtype=np.uint8).copy()


def warp_instance(
    instance: PoseInstance,
    draw: AugmentDraw,
    extent: Tuple[int, int],
    schema: KeypointSchema,
) -> PoseInstance:
    """Move keypoints with the draw; flips swap paired indices.

    Keypoints leaving the image become unlabeled.
    """
    if draw.is_identity:
        return instance.model_copy(deep=True)
    h, w = extent
    m = forward_matrix(draw, extent)
    coords = (instance.coords() + 0.5) @ m[:, :2].T + m[:, 2] - 0.5
    vis = np.asarray(instance.visibility)

    x, y, bw, bh = instance.bbox
    corners = np.array([[x, y], [x + bw, y], [x, y + bh], [x + bw, y + bh]], dtype=np.float64)
    corners = (corners + 0.5) @ m[:, :2].T + m[:, 2] - 0.5
    lo, hi = corners.min(axis=0), corners.max(axis=0)

    if draw.flip:
        perm = schema.flip_permutation()
        coords, vis = coords[perm], vis[perm]
    inside = (coords[:, 0] >= 0) & (coords[:, 0] <= w - 1)
    inside &= (coords[:, 1] >= 0) & (coords[:, 1] <= h - 1)
    vis = np.where(inside, vis, 0)
    return instance.model_copy(
        update={
            "keypoints": [(float(a), float(b)) for a, b in coords],
            "visibility": [int(v) for v in vis],
            "bbox": (float(lo[0]), float(lo[1]), float(hi[0] - lo[0]), float(hi[1] - lo[1])),
            "area": instance.area * draw.scale**2,
            "head_size": None if instance.head_size is None else instance.head_size * draw.scale,
        }
    )


def augment(
    image: np.ndarray,
    instance: PoseInstance,
    config: AugmentConfig,
    rng: np.random.Generator,
    schema: KeypointSchema,
) -> Tuple[np.ndarray, PoseInstance, AugmentDraw]:
    """Sample a draw and apply it to the pixels and keypoints together."""
    draw = sample_draw(config, rng)
    return warp_image(image, draw), warp_instance(instance, draw, image.shape, schema), draw
