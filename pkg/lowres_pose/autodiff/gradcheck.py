"""Finite-difference verification of autodiff gradients."""

from dataclasses import dataclass, field
from typing import Callable, List, Sequence

import numpy as np

from lowres_pose.autodiff.tensor import Tensor, no_grad

DEFAULT_EPS = 1e-6
DEFAULT_TOLERANCE = 1e-6


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``|a - n| / (|a| + |n|)`` with Frobenius norms; 0 when both vanish."""
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


@dataclass
class GradcheckResult:
    name: str
    errors: List[float] = field(default_factory=list)
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def max_error(self) -> float:
        return max(self.errors) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


def numeric_gradient(
    fn: Callable[..., Tensor], inputs: Sequence[np.ndarray], index: int, eps: float = DEFAULT_EPS
) -> np.ndarray:
    """Central differences of scalar ``fn`` with respect to ``inputs[index]``."""
    arrays = [np.array(a, dtype=np.float64) for a in inputs]
    target = arrays[index]
    grad = np.zeros_like(target)
    flat = target.reshape(-1)
    gflat = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            plus = fn(*[Tensor(a) for a in arrays]).item()
            flat[i] = orig - eps
            minus = fn(*[Tensor(a) for a in arrays]).item()
            flat[i] = orig
            gflat[i] = (plus - minus) / (2.0 * eps)
    return grad


def gradcheck(
    fn: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    name: str = "",
    eps: float = DEFAULT_EPS,
    tolerance: float = DEFAULT_TOLERANCE,
) -> GradcheckResult:
    """Compare backward gradients of scalar ``fn`` against central differences.

    Every input is differentiated, in float64.
    """
    leaves = [Tensor(np.array(a, dtype=np.float64), requires_grad=True) for a in inputs]
    fn(*leaves).backward()
    result = GradcheckResult(name=name, tolerance=tolerance)
    for i, leaf in enumerate(leaves):
        analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        result.errors.append(relative_error(analytic, numeric_gradient(fn, inputs, i, eps)))
    return result


def gradcheck_parameters(
    loss_fn: Callable[[], Tensor],
    parameters: Sequence[Tensor],
    name: str = "",
    eps: float = DEFAULT_EPS,
    tolerance: float = DEFAULT_TOLERANCE,
) -> GradcheckResult:
    """Gradcheck a closure over parameter tensors it reads in place.

    The parameters must be float64; each is perturbed in place and restored.
    """
    for p in parameters:
        p.zero_grad()
    loss_fn().backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in parameters]
    result = GradcheckResult(name=name, tolerance=tolerance)
    with no_grad():
        for p, a in zip(parameters, analytic):
            numeric = np.zeros_like(p.data)
            flat = p.data.reshape(-1)
            nflat = numeric.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                plus = loss_fn().item()
                flat[i] = orig - eps
                minus = loss_fn().item()
                flat[i] = orig
                nflat[i] = (plus - minus) / (2.0 * eps)
            result.errors.append(relative_error(a, numeric))
    return result
