"""OKS average precision and PCKh."""

from lowres_pose.metrics.evaluation import (
    OKS_THRESHOLDS,
    average_precision,
    evaluate,
    oks,
    pckh,
)

__all__ = ["OKS_THRESHOLDS", "average_precision", "evaluate", "oks", "pckh"]
