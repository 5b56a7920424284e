"""Exception hierarchy for the toolkit."""

from typing import Optional


class PoseToolkitError(Exception):
    """Base class for toolkit errors."""


class ShapeError(PoseToolkitError, ValueError):
    """Tensor extents are incompatible with an operation."""


class NonFiniteError(PoseToolkitError, ArithmeticError):
    """A tensor contains NaN or Inf."""


class GraphError(PoseToolkitError):
    """The compute graph cannot be differentiated (cycle, non-scalar root)."""


class ConfigError(PoseToolkitError, ValueError):
    """Invalid experiment configuration."""


class CheckpointError(PoseToolkitError):
    """Malformed or incompatible checkpoint file."""


class SchemaError(PoseToolkitError, ValueError):
    """Annotation file violates the documented layout."""

    def __init__(self, message: str, index: Optional[int] = None, section: str = "annotations"):
        self.index = index
        self.section = section
        if index is not None:
            message = f"{section}[{index}]: {message}"
        super().__init__(message)


class TrainingDivergedError(PoseToolkitError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, detail: str = ""):
        self.epoch = epoch
        message = f"Training diverged at epoch {epoch}"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)
