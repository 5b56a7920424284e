"""Parameter containers for the layer stack."""

from typing import Dict, Iterator, Mapping, Optional, Tuple

import numpy as np

from lowres_pose.autodiff.tensor import Tensor
from lowres_pose.errors import CheckpointError


def init_bound(fan_in: int) -> float:
    return float(np.sqrt(1.0 / fan_in))


class Module:
    """Owns named parameter tensors and child modules.

    Parameter names are dotted paths (``backbone.stage0.weight``); the same
    names key the checkpoint file.
    """

    def __init__(self) -> None:
        self._params: Dict[str, Tensor] = {}
        self._children: Dict[str, "Module"] = {}

    def add_parameter(self, name: str, tensor: Tensor) -> Tensor:
        tensor.requires_grad = True
        tensor.name = name
        self._params[name] = tensor
        return tensor

    def add_module(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Mapping[str, np.ndarray], strict: bool = True) -> None:
        """Copy arrays into the parameters, keeping each parameter's dtype."""
        own = dict(self.named_parameters())
        if strict:
            missing = sorted(set(own) - set(state))
            unexpected = sorted(set(state) - set(own))
            if missing or unexpected:
                raise CheckpointError(
                    f"State mismatch: missing {missing or 'none'}, "
                    f"unexpected {unexpected or 'none'}"
                )
        for name, p in own.items():
            if name not in state:
                continue
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise CheckpointError(f"'{name}' has shape {arr.shape}, expected {p.shape}")
            p.data = arr.astype(p.dtype).copy()

    @property
    def dtype(self) -> Optional[np.dtype]:
        params = self.parameters()
        return params[0].dtype if params else None
