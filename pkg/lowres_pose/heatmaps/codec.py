"""Gaussian heatmap targets, their statistics, and heatmap decoding."""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from lowres_pose.errors import ShapeError
from lowres_pose.schemas.pose import PoseInstance

# A pixel is positive iff its Gaussian value is at least this.
POSITIVE_CUTOFF = 0.01
QUARTER = 0.25


@dataclass
class HeatmapSet:
    """N heatmaps on a grid ``stride`` image pixels apart.

    Heatmap pixel ``(q, p)`` (column, row) sits at image position
    ``(q * stride + origin_offset, p * stride + origin_offset)``.
    ``activated`` marks post-activation responses, which must lie in [0, 1].
    """

    maps: np.ndarray
    stride: float = 1.0
    origin_offset: float = 0.0
    activated: bool = True

    def __post_init__(self) -> None:
        self.maps = np.asarray(self.maps)
        if self.maps.ndim != 3:
            raise ShapeError(f"Heatmaps must be (N, H, W), got shape {self.maps.shape}")
        if self.stride <= 0:
            raise ValueError(f"Stride must be positive, got {self.stride}")
        if self.activated and self.maps.size and (self.maps.min() < 0 or self.maps.max() > 1):
            raise ValueError("Activated heatmap responses must lie in [0, 1]")

    @property
    def num_keypoints(self) -> int:
        return self.maps.shape[0]

    @property
    def extent(self) -> Tuple[int, int]:
        return self.maps.shape[1], self.maps.shape[2]


def positive_radius_sq(t: float) -> float:
    """Largest squared grid distance whose Gaussian value stays >= the cutoff."""
    return 2.0 * t * t * math.log(1.0 / POSITIVE_CUTOFF)


def grid_center(coord: float, stride: float, origin_offset: float = 0.0) -> int:
    return int(math.floor((coord - origin_offset) / stride + 0.5))


def gaussian_maps(
    coords: np.ndarray,
    labeled: np.ndarray,
    extent: Tuple[int, int],
    t: float,
    stride: float = 1.0,
    origin_offset: float = 0.0,
    dtype=np.float64,
) -> np.ndarray:
    """(N, Hh, Wh) truncated Gaussian targets for (N, 2) image coordinates."""
    if t <= 0:
        raise ValueError(f"Gaussian spread t must be positive, got {t}")
    hh, wh = extent
    if hh <= 0 or wh <= 0:
        raise ValueError(f"Heatmap extents must be positive, got {extent}")
    n = coords.shape[0]
    maps = np.zeros((n, hh, wh), dtype=dtype)
    rows = np.arange(hh, dtype=np.float64)[:, None]
    cols = np.arange(wh, dtype=np.float64)[None, :]
    r2 = positive_radius_sq(t)
    for k in range(n):
        if not labeled[k]:
            continue
        u = grid_center(coords[k, 0], stride, origin_offset)
        v = grid_center(coords[k, 1], stride, origin_offset)
        if not (0 <= u < wh and 0 <= v < hh):
            continue
        d2 = (cols - u) ** 2 + (rows - v) ** 2
        values = np.exp(-d2 / (2.0 * t * t))
        values[d2 > r2] = 0.0
        maps[k] = values
    return maps


def gen_target(
    instance: PoseInstance,
    extent: Tuple[int, int],
    t: float,
    stride: float = 1.0,
    origin_offset: float = 0.0,
) -> HeatmapSet:
    """Ground-truth heatmaps of one instance.

    Unlabeled keypoints and keypoints whose grid centre falls off the map
    give all-zero maps.
    """
    maps = gaussian_maps(
        instance.coords(), instance.labeled_mask(), extent, t, stride, origin_offset
    )
    return HeatmapSet(maps=maps, stride=stride, origin_offset=origin_offset)


def count_pos_neg(heatmaps: HeatmapSet | np.ndarray) -> List[Tuple[int, int]]:
    """Per-map (positive, zero) pixel counts."""
    maps = heatmaps.maps if isinstance(heatmaps, HeatmapSet) else np.asarray(heatmaps)
    if maps.ndim == 2:
        maps = maps[None]
    total = maps.shape[1] * maps.shape[2]
    result = []
    for m in maps:
        pos = int(np.count_nonzero(m > 0))
        result.append((pos, total - pos))
    return result


def pos_neg_ratio(positives: int, negatives: int) -> float:
    """Negatives per positive, the ``1:x`` of a P:N statistic."""
    if positives <= 0:
        raise ValueError("No positive pixels")
    return negatives / positives


def _quarter_shift(lo: float, hi: float) -> float:
    if hi > lo:
        return QUARTER
    if hi < lo:
        return -QUARTER
    return 0.0


def decode_maps(
    maps: np.ndarray, stride: float = 1.0, origin_offset: float = 0.0
) -> Tuple[np.ndarray, np.ndarray]:
    """Image coordinates (N, 2) and peak responses (N,) of (N, H, W) heatmaps.

    Each peak moves a quarter pixel along each axis toward the larger of its
    two neighbours; peaks on a border get no shift along that axis.
    """
    maps = np.asarray(maps)
    if maps.ndim != 3:
        raise ShapeError(f"Heatmaps must be (N, H, W), got shape {maps.shape}")
    n, h, w = maps.shape
    if h == 0 or w == 0:
        raise ShapeError("Cannot decode an empty heatmap")
    coords = np.zeros((n, 2), dtype=np.float64)
    conf = np.zeros(n, dtype=np.float64)
    for k in range(n):
        m = maps[k]
        p, q = np.unravel_index(int(np.argmax(m)), m.shape)
        x, y = float(q), float(p)
        if 0 < q < w - 1:
            x += _quarter_shift(m[p, q - 1], m[p, q + 1])
        if 0 < p < h - 1:
            y += _quarter_shift(m[p - 1, q], m[p + 1, q])
        coords[k] = (x * stride + origin_offset, y * stride + origin_offset)
        conf[k] = float(m[p, q])
    return coords, conf


def decode(heatmaps: HeatmapSet) -> PoseInstance:
    """Keypoint estimate with per-keypoint confidences and their mean as score."""
    coords, conf = decode_maps(heatmaps.maps, heatmaps.stride, heatmaps.origin_offset)
    return PoseInstance.from_arrays(
        coords,
        np.full(len(conf), 2),
        confidences=[float(c) for c in conf],
        score=instance_score(conf, 1.0),
    )


def pairs_to_permutation(pairs: Sequence[Tuple[int, int]], n: int) -> List[int]:
    """Channel permutation of a flip pairing; rejects non-involutive pairings."""
    perm = list(range(n))
    seen: set[int] = set()
    for a, b in pairs:
        if a == b or a in seen or b in seen:
            raise ValueError(f"Flip pairing is not an involution at ({a}, {b})")
        if not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"Flip pair ({a}, {b}) out of range for {n} keypoints")
        seen.update((a, b))
        perm[a], perm[b] = b, a
    return perm


def align_flipped(maps: np.ndarray, perm: Sequence[int], shift: bool = True) -> np.ndarray:
    """Mirror (..., N, H, W) heatmaps of a flipped input back onto the original frame."""
    aligned = maps[..., list(perm), :, ::-1].copy()
    if shift:
        aligned[..., 1:] = aligned[..., :-1].copy()
    return aligned


def flip_average(
    original: HeatmapSet,
    flipped_output: HeatmapSet,
    pair_map: Sequence[Tuple[int, int]],
    shift: bool = True,
) -> HeatmapSet:
    """Average heatmaps with those predicted for the horizontally flipped input.

    The flipped prediction is mirrored, its paired channels swapped and, with
    ``shift``, moved one pixel right (column 0 keeps its value).
    """
    if original.maps.shape != flipped_output.maps.shape:
        raise ShapeError(
            f"Heatmap extents differ: {original.maps.shape} vs {flipped_output.maps.shape}"
        )
    perm = pairs_to_permutation(pair_map, original.num_keypoints)
    aligned = align_flipped(flipped_output.maps, perm, shift)
    return HeatmapSet(
        maps=(original.maps + aligned) / 2.0,
        stride=original.stride,
        origin_offset=original.origin_offset,
        activated=original.activated and flipped_output.activated,
    )


def instance_score(confidences: Sequence[float] | np.ndarray, box_score: float) -> float:
    """Mean keypoint confidence times the person box score."""
    conf = np.asarray(confidences, dtype=np.float64).reshape(-1)
    if conf.size == 0:
        raise ValueError("Instance score needs at least one keypoint confidence")
    return float(conf.mean() * box_score)


def heatmap_targets(
    instances: Sequence[PoseInstance],
    extent: Tuple[int, int],
    t: float,
    stride: float,
    dtype=np.float64,
) -> np.ndarray:
    """(B, N, Hh, Wh) batch of targets."""
    return np.stack(
        [
            gaussian_maps(inst.coords(), inst.labeled_mask(), extent, t, stride, dtype=dtype)
            for inst in instances
        ]
    )

