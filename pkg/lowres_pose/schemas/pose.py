"""Keypoint schema and person-instance models."""

from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from lowres_pose.schemas.versioning import VersionedSchema

# Published per-keypoint sigmas of the 17-keypoint benchmark layout.
COCO_KEYPOINT_NAMES: List[str] = [
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
]
COCO_SIGMAS: List[float] = [
    0.026, 0.025, 0.025, 0.035, 0.035, 0.079, 0.079, 0.072, 0.072,
    0.062, 0.062, 0.107, 0.107, 0.087, 0.087, 0.089, 0.089,
]  # fmt: skip
COCO_FLIP_PAIRS: List[Tuple[int, int]] = [
    (1, 2), (3, 4), (5, 6), (7, 8), (9, 10), (11, 12), (13, 14), (15, 16)
]  # fmt: skip
# Stick figures are ~35 px tall against 4 px heatmap cells, so their OKS
# tolerances are those of the broad benchmark joints: shoulder for the head,
# hip for hands and feet.
STICK_FIGURE_SIGMAS: List[float] = [0.079, 0.107, 0.107, 0.107, 0.107]


class KeypointSchema(VersionedSchema):
    """Keypoint names, symmetric flip pairs and OKS sigmas of a dataset."""

    names: List[str] = Field(..., min_length=1)
    flip_pairs: List[Tuple[int, int]] = Field(default_factory=list)
    sigmas: List[float] = Field(default_factory=list)
    skeleton: List[Tuple[int, int]] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_pairs(self) -> "KeypointSchema":
        """Flip pairs must form an involution over keypoint indices."""
        n = len(self.names)
        seen: set[int] = set()
        for a, b in self.flip_pairs:
            if a == b:
                raise ValueError(f"Flip pair ({a}, {b}) maps a keypoint onto itself")
            for idx in (a, b):
                if not 0 <= idx < n:
                    raise ValueError(f"Flip pair index {idx} out of range for {n} keypoints")
                if idx in seen:
                    raise ValueError(f"Keypoint {idx} appears in more than one flip pair")
                seen.add(idx)
        if self.sigmas and len(self.sigmas) != n:
            raise ValueError(f"Expected {n} sigmas, got {len(self.sigmas)}")
        if any(s <= 0 for s in self.sigmas):
            raise ValueError("OKS sigmas must be positive")
        for a, b in self.skeleton:
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"Skeleton edge ({a}, {b}) out of range")
        return self

    @property
    def num_keypoints(self) -> int:
        return len(self.names)

    def flip_permutation(self) -> List[int]:
        """Index map sending each keypoint to its mirror partner (identity if unpaired)."""
        perm = list(range(self.num_keypoints))
        for a, b in self.flip_pairs:
            perm[a], perm[b] = b, a
        return perm

    def oks_constants(self) -> np.ndarray:
        """Per-keypoint k for OKS, twice the published sigma."""
        if self.sigmas:
            return 2.0 * np.asarray(self.sigmas, dtype=np.float64)
        return np.full(self.num_keypoints, 2.0 * 0.079)


def coco_schema() -> KeypointSchema:
    """The 17-keypoint benchmark schema."""
    return KeypointSchema(
        names=list(COCO_KEYPOINT_NAMES),
        flip_pairs=list(COCO_FLIP_PAIRS),
        sigmas=list(COCO_SIGMAS),
    )


def stick_figure_schema() -> KeypointSchema:
    """Five-keypoint schema of the synthetic stick figures."""
    return KeypointSchema(
        names=["head", "left_hand", "right_hand", "left_foot", "right_foot"],
        flip_pairs=[(1, 2), (3, 4)],
        sigmas=list(STICK_FIGURE_SIGMAS),
        skeleton=[(0, 1), (0, 2), (0, 3), (0, 4)],
    )


class PoseInstance(BaseModel):
    """A person sample: keypoints in image pixels, visibility, box and area.

    Visibility follows the benchmark triple convention: 0 unlabeled,
    1 labeled but occluded, 2 visible. Any flag > 0 counts as labeled.
    """

    keypoints: List[Tuple[float, float]]
    visibility: List[int]
    bbox: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    area: float = Field(default=0.0, ge=0.0)
    head_size: Optional[float] = Field(default=None, gt=0.0)
    score: Optional[float] = None
    confidences: Optional[List[float]] = None
    image_id: Optional[int] = None

    @field_validator("visibility")
    @classmethod
    def check_flags(cls, v: List[int]) -> List[int]:
        """Visibility flags are 0, 1 or 2."""
        if any(flag not in (0, 1, 2) for flag in v):
            raise ValueError("Visibility flags must be 0, 1 or 2")
        return v

    @model_validator(mode="after")
    def check_lengths(self) -> "PoseInstance":
        """Per-keypoint lists share one length."""
        n = len(self.keypoints)
        if len(self.visibility) != n:
            raise ValueError(f"{n} keypoints but {len(self.visibility)} visibility flags")
        if self.confidences is not None and len(self.confidences) != n:
            raise ValueError(f"{n} keypoints but {len(self.confidences)} confidences")
        return self

    @property
    def num_keypoints(self) -> int:
        return len(self.keypoints)

    def coords(self) -> np.ndarray:
        """Keypoints as an (N, 2) float64 array of (x, y)."""
        return np.asarray(self.keypoints, dtype=np.float64).reshape(-1, 2)

    def labeled_mask(self) -> np.ndarray:
        return np.asarray(self.visibility, dtype=np.int64) > 0

    @classmethod
    def from_arrays(
        cls,
        coords: np.ndarray,
        visibility: np.ndarray,
        **kwargs,
    ) -> "PoseInstance":
        """Build an instance from (N, 2) coordinates and N flags."""
        return cls(
            keypoints=[(float(x), float(y)) for x, y in np.asarray(coords).reshape(-1, 2)],
            visibility=[int(v) for v in np.asarray(visibility).reshape(-1)],
            **kwargs,
        )
