"""Dense tensor with reverse-mode differentiation on a numpy backend."""

from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from lowres_pose.errors import GraphError, NonFiniteError, ShapeError

MAX_RANK = 4
SUPPORTED_DTYPES = (np.float32, np.float64)

_grad_enabled = True


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph construction inside the block."""
    global _grad_enabled
    previous, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


def _as_array(data, dtype=None) -> np.ndarray:
    arr = np.asarray(data, dtype=dtype)
    if arr.dtype.type not in SUPPORTED_DTYPES:
        arr = arr.astype(np.float64)
    return arr


class Tensor:
    """A node of the compute graph.

    Leaves are inputs or parameters; every operation output records its
    parents, an operation identifier and a closure that pushes its gradient
    back to the parents. Precision is whatever float dtype the leaves carry.
    """

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: str = "",
        dtype=None,
        _parents: Tuple["Tensor", ...] = (),
        _op: str = "leaf",
    ):
        arr = _as_array(data, dtype)
        if arr.ndim > MAX_RANK:
            raise ShapeError(f"Tensor rank {arr.ndim} exceeds {MAX_RANK}")
        if not np.isfinite(arr).all():
            raise NonFiniteError(f"'{_op}' produced non-finite values")
        self.data: np.ndarray = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self.op = _op
        self._parents = _parents
        self._backward: Optional[Callable[[], None]] = None

    # -- construction -------------------------------------------------

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: Sequence["Tensor"],
        op: str,
    ) -> "Tensor":
        """Create an operation output; gradients flow only if a parent needs them."""
        track = _grad_enabled and any(p.requires_grad for p in parents)
        return cls(
            data,
            requires_grad=track,
            _parents=tuple(parents) if track else (),
            _op=op,
        )

    def set_backward(self, fn: Callable[[], None]) -> None:
        if self.requires_grad and self._parents:
            self._backward = fn

    @classmethod
    def uniform(
        cls,
        shape: Tuple[int, ...],
        bound: float,
        rng: np.random.Generator,
        dtype=np.float64,
        name: str = "",
    ) -> "Tensor":
        """Parameter drawn uniformly from [-bound, bound)."""
        data = rng.uniform(-bound, bound, size=shape).astype(dtype)
        return cls(data, requires_grad=True, name=name)

    @classmethod
    def full(
        cls,
        shape: Tuple[int, ...],
        value: float,
        dtype=np.float64,
        requires_grad: bool = False,
        name: str = "",
    ) -> "Tensor":
        return cls(np.full(shape, value, dtype=dtype), requires_grad=requires_grad, name=name)

    # -- gradient plumbing -------------------------------------------

    def accumulate_grad(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if g.shape != self.data.shape:
            raise ShapeError(f"Gradient {g.shape} does not match '{self.op}' output {self.shape}")
        g = g.astype(self.data.dtype, copy=False)
        self.grad = g.copy() if self.grad is None else self.grad + g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Populate gradients of every node reachable from this scalar."""
        if self.data.size != 1:
            raise GraphError(f"backward needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise GraphError("Loss does not depend on any tensor requiring gradients")
        order = topological_order(self)
        self.accumulate_grad(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward()

    # -- views ---------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.shape}, dtype={self.dtype})"

    # -- elementwise arithmetic ---------------------------------------

    def _check_same(self, other: "Tensor", op: str) -> None:
        if self.shape != other.shape:
            raise ShapeError(f"{op}: shapes {self.shape} and {other.shape} differ")

    def __add__(self, other: "Tensor") -> "Tensor":
        self._check_same(other, "add")
        out = Tensor.from_op(self.data + other.data, (self, other), "add")

        def _backward():
            self.accumulate_grad(out.grad)
            other.accumulate_grad(out.grad)

        out.set_backward(_backward)
        return out

    def __sub__(self, other: "Tensor") -> "Tensor":
        self._check_same(other, "sub")
        out = Tensor.from_op(self.data - other.data, (self, other), "sub")

        def _backward():
            self.accumulate_grad(out.grad)
            other.accumulate_grad(-out.grad)

        out.set_backward(_backward)
        return out

    def __mul__(self, other: "Tensor | float") -> "Tensor":
        if not isinstance(other, Tensor):
            c = float(other)
            out = Tensor.from_op(self.data * c, (self,), "scale")
            out.set_backward(lambda: self.accumulate_grad(out.grad * c))
            return out
        self._check_same(other, "mul")
        out = Tensor.from_op(self.data * other.data, (self, other), "mul")

        def _backward():
            self.accumulate_grad(out.grad * other.data)
            other.accumulate_grad(out.grad * self.data)

        out.set_backward(_backward)
        return out

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return self * -1.0

    def sum(self) -> "Tensor":
        out = Tensor.from_op(np.asarray(self.data.sum()), (self,), "sum")
        out.set_backward(lambda: self.accumulate_grad(np.broadcast_to(out.grad, self.shape)))
        return out

    def mean(self) -> "Tensor":
        n = self.data.size
        out = Tensor.from_op(np.asarray(self.data.mean()), (self,), "mean")
        out.set_backward(
            lambda: self.accumulate_grad(np.broadcast_to(out.grad / n, self.shape))
        )
        return out

    def reshape(self, *shape: int) -> "Tensor":
        out = Tensor.from_op(self.data.reshape(*shape), (self,), "reshape")
        out.set_backward(lambda: self.accumulate_grad(out.grad.reshape(self.shape)))
        return out


def topological_order(root: Tensor) -> List[Tensor]:
    """Parents-before-children order of the graph under ``root``.

    Iterative depth-first search; a back edge means the graph has a cycle.
    """
    order: List[Tensor] = []
    state: dict[int, int] = {}  # 1 = on stack, 2 = done
    stack: List[Tuple[Tensor, int]] = [(root, 0)]
    while stack:
        node, child_idx = stack.pop()
        key = id(node)
        if child_idx == 0:
            if state.get(key) == 2:
                continue
            state[key] = 1
        if child_idx < len(node._parents):
            stack.append((node, child_idx + 1))
            parent = node._parents[child_idx]
            pstate = state.get(id(parent))
            if pstate == 1:
                raise GraphError(f"Cycle detected through '{parent.op}'")
            if pstate is None:
                stack.append((parent, 0))
        else:
            state[key] = 2
            order.append(node)
    return order


def backward(loss: Tensor, parameters: Sequence[Tensor] = ()) -> List[np.ndarray]:
    """Run backward from ``loss`` and return the gradient of each parameter.

    Parameters the loss does not depend on get an all-zero gradient.
    """
    loss.backward()
    grads = []
    for p in parameters:
        if p.grad is None:
            p.grad = np.zeros_like(p.data)
        grads.append(p.grad)
    return grads
