"""Pydantic schemas for the pose toolkit."""

from lowres_pose.schemas.pose import (
    COCO_SIGMAS,
    KeypointSchema,
    PoseInstance,
    coco_schema,
    stick_figure_schema,
)
from lowres_pose.schemas.results import (
    BudgetSummary,
    ComplexityReport,
    ComponentCost,
    EvalResult,
    LayerCost,
)
from lowres_pose.schemas.specs import (
    BackboneSpec,
    HeadKind,
    HeadSpec,
    LossKind,
    LossSpec,
    StageSpec,
)
from lowres_pose.schemas.training import (
    AugmentConfig,
    TrainConfig,
    apply_overrides,
    load_train_config,
)
from lowres_pose.schemas.versioning import VersionedSchema

__all__ = [
    # Base
    "VersionedSchema",
    # Architecture and supervision
    "BackboneSpec",
    "HeadKind",
    "HeadSpec",
    "LossKind",
    "LossSpec",
    "StageSpec",
    # Poses
    "COCO_SIGMAS",
    "KeypointSchema",
    "PoseInstance",
    "coco_schema",
    "stick_figure_schema",
    # Training
    "AugmentConfig",
    "TrainConfig",
    "apply_overrides",
    "load_train_config",
    # Results
    "BudgetSummary",
    "ComplexityReport",
    "ComponentCost",
    "EvalResult",
    "LayerCost",
]
