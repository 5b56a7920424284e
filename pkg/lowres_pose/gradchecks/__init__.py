"""Named gradient-check cases over every layer, head and loss."""

from lowres_pose.gradchecks.registry import (
    GradcheckRegistry,
    get_case_registry,
    register_case,
)

__all__ = ["GradcheckRegistry", "get_case_registry", "register_case"]
