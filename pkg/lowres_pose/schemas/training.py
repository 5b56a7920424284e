"""Training configuration schema and the structured-text config loader."""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

from pydantic import Field, field_validator, model_validator

from lowres_pose.errors import ConfigError
from lowres_pose.schemas.specs import BackboneSpec, HeadKind, HeadSpec, LossSpec
from lowres_pose.schemas.versioning import VersionedSchema


class AugmentConfig(VersionedSchema):
    """Random affine augmentation ranges."""

    enabled: bool = True
    scale_range: float = Field(default=0.35, ge=0.0, lt=1.0)
    rotation_range: float = Field(default=45.0, ge=0.0, le=180.0)
    flip_prob: float = Field(default=0.5, ge=0.0, le=1.0)


class TrainConfig(VersionedSchema):
    """Everything that determines a training run."""

    input_extent: Tuple[int, int] = (64, 64)
    backbone: BackboneSpec = Field(default_factory=BackboneSpec)
    head: HeadSpec = Field(
        default_factory=lambda: HeadSpec(
            kind=HeadKind.LHR, in_channels=64, num_keypoints=5, upsample_ratio=2
        )
    )
    loss: LossSpec = Field(default_factory=LossSpec.focal_default)
    batch_size: int = Field(default=32, gt=0)
    epochs: int = Field(default=60, ge=0)
    base_lr: float = Field(default=1e-3, gt=0.0)
    decay_epochs: List[int] = Field(default_factory=lambda: [40, 52])
    decay_factor: float = Field(default=0.1, gt=0.0, le=1.0)
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)
    target_sigma: float = Field(default=1.0, gt=0.0, description="t of the Gaussian targets")
    sigmoid_prior: Optional[float] = Field(
        default=0.01,
        gt=0.0,
        lt=1.0,
        description="Initial output probability of sigmoid-supervised heads",
    )
    flip_test: bool = True
    flip_shift: bool = True
    seed: int = 0
    precision: Literal[32, 64] = 32
    train_dir: str = "./data/synthetic/train"
    val_dir: str = "./data/synthetic/val"
    output_dir: str = "./runs/default"
    train_limit: Optional[int] = Field(default=None, gt=0)
    val_limit: Optional[int] = Field(default=None, gt=0)

    @field_validator("decay_epochs")
    @classmethod
    def sort_decay(cls, v: List[int]) -> List[int]:
        return sorted(v)

    @model_validator(mode="after")
    def check_consistency(self) -> "TrainConfig":
        """Cross-field invariants: schedule, channel wiring, spatial divisibility."""
        for e in self.decay_epochs:
            if not 0 < e < self.epochs:
                raise ValueError(f"Decay epoch {e} must lie in (0, {self.epochs})")
        if self.head.in_channels != self.backbone.out_channels:
            raise ValueError(
                f"Head expects {self.head.in_channels} channels, "
                f"backbone emits {self.backbone.out_channels}"
            )
        stride = self.backbone.total_stride
        for extent in self.input_extent:
            if extent % stride != 0:
                raise ValueError(f"Input extent {extent} not divisible by stride {stride}")
        return self

    @property
    def feature_extent(self) -> Tuple[int, int]:
        s = self.backbone.total_stride
        return (self.input_extent[0] // s, self.input_extent[1] // s)

    @property
    def heatmap_extent(self) -> Tuple[int, int]:
        fh, fw = self.feature_extent
        f = self.head.scale_factor
        return (fh * f, fw * f)

    @property
    def network_head(self) -> HeadSpec:
        """The head as built.

        Under a sigmoid loss the output bias starts at the logit of
        ``sigmoid_prior`` unless the head sets its own prior.
        """
        if (
            self.head.prior_prob is not None
            or self.sigmoid_prior is None
            or not self.loss.applies_sigmoid
        ):
            return self.head
        return self.head.model_copy(update={"prior_prob": self.sigmoid_prior})

    @property
    def heatmap_stride(self) -> float:
        """Input pixels per heatmap pixel."""
        return self.input_extent[1] / self.heatmap_extent[1]

    def lr_at(self, epoch: int) -> float:
        """Step-decayed learning rate for a 0-based epoch."""
        drops = sum(1 for e in self.decay_epochs if epoch >= e)
        return self.base_lr * (self.decay_factor**drops)


def _parse_override_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply ``dotted.path=value`` overrides to a nested config dict in place."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"Override '{item}' is not of the form path=value")
        path, raw = item.split("=", 1)
        keys = [k for k in path.strip().split(".") if k]
        if not keys:
            raise ConfigError(f"Override '{item}' has an empty path")
        node = data
        for key in keys[:-1]:
            child = node.get(key)
            if child is None:
                child = {}
                node[key] = child
            if not isinstance(child, dict):
                raise ConfigError(f"Override path '{path}' descends into a non-mapping")
            node = child
        node[keys[-1]] = _parse_override_value(raw)
    return data


def load_train_config(
    path: Optional[str | Path] = None,
    overrides: Sequence[str] = (),
    defaults: Optional[Dict[str, Any]] = None,
) -> TrainConfig:
    """Load a JSON config file (optional), apply overrides and validate.

    Precedence, lowest first: model defaults, ``defaults``, the file, overrides.
    """
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read config '{path}': {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config '{path}' must hold a JSON object")
    # applies_sigmoid re-resolves from the loss kind unless set explicitly
    base = TrainConfig().model_dump(mode="json", exclude={"loss": {"applies_sigmoid"}})
    base = _deep_merge(base, defaults) if defaults else base
    data = _deep_merge(base, data)
    if overrides:
        data = apply_overrides(data, overrides)
    return TrainConfig.model_validate(data)
