"""Adam optimizer."""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from lowres_pose.autodiff.tensor import Tensor
from lowres_pose.errors import ShapeError


@dataclass
class AdamState:
    """Step count and both moment estimates of one parameter."""

    step: int = 0
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None


def adam_update(
    param: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Apply one bias-corrected Adam step to ``param`` in place."""
    if grad.shape != param.shape:
        raise ShapeError(f"Gradient {grad.shape} does not match parameter {param.shape}")
    if state.m is None or state.v is None:
        state.m = np.zeros_like(param)
        state.v = np.zeros_like(param)
    state.step += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1**state.step)
    v_hat = state.v / (1.0 - beta2**state.step)
    param -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(param.dtype, copy=False)


@dataclass
class Adam:
    """Adam over a set of named parameters with a settable learning rate."""

    params: Dict[str, Tensor]
    lr: float = 1e-3
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    states: Dict[str, AdamState] = field(default_factory=dict)

    @classmethod
    def from_named(cls, named: Iterable[Tuple[str, Tensor]], **kwargs) -> "Adam":
        return cls(params=dict(named), **kwargs)

    def step(self) -> None:
        """Update every parameter that received a gradient."""
        beta1, beta2 = self.betas
        for name, p in self.params.items():
            if p.grad is None:
                continue
            state = self.states.setdefault(name, AdamState())
            adam_update(p.data, p.grad, state, self.lr, beta1, beta2, self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()
