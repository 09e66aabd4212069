"""
Reverse-Mode Automatic Differentiation
Dense numpy-backed Tensor plus the computation record that backward() replays
"""

import itertools
import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_local = threading.local()


def _record_stack() -> List["ComputationRecord"]:
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


def active_record() -> Optional["ComputationRecord"]:
    """Return the record ops are currently appended to (None = no tracking)"""
    stack = _record_stack()
    return stack[-1] if stack else None


class Tensor:
    """
    Dense n-dimensional array with an optional gradient.

    Tensors created while a ComputationRecord is active carry a node id
    linking them into that record. Tensors with requires_grad=True are
    parameters: backward() deposits gradients into their ``grad``.
    """

    def __init__(self, values, requires_grad: bool = False,
                 name: Optional[str] = None, dtype=None):
        array = np.asarray(values, dtype=dtype)
        if array.dtype.kind != 'f':
            array = array.astype(np.float64)
        self.values = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.node_id: Optional[int] = None
        self.record: Optional["ComputationRecord"] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def dtype(self):
        return self.values.dtype

    def zero_grad(self):
        self.grad = np.zeros_like(self.values)

    def numpy(self) -> np.ndarray:
        return self.values

    def item(self) -> float:
        return float(self.values.reshape(-1)[0])

    def __repr__(self):
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # Operator sugar, routed through the differentiable kit
    def __add__(self, other):
        from src.tensor import functional as F
        return F.add(self, other)

    def __radd__(self, other):
        from src.tensor import functional as F
        return F.add(other, self)

    def __sub__(self, other):
        from src.tensor import functional as F
        return F.sub(self, other)

    def __mul__(self, other):
        from src.tensor import functional as F
        return F.mul(self, other)

    def __rmul__(self, other):
        from src.tensor import functional as F
        return F.mul(other, self)

    def __neg__(self):
        from src.tensor import functional as F
        return F.scale(self, -1.0)

    def __matmul__(self, other):
        from src.tensor import functional as F
        return F.matmul(self, other)


@dataclass
class OpNode:
    """One recorded operation"""
    op: str
    inputs: Tuple[Optional[int], ...]
    output: int
    backward_fn: BackwardFn


class ComputationRecord:
    """
    Ordered list of op nodes, appended in execution order.

    Use as a context manager: ops executed inside the ``with`` block are
    recorded; ops executed outside any record are plain numpy computations.
    A record is owned by a single thread.
    """

    def __init__(self):
        self.nodes: List[OpNode] = []
        self._counter = itertools.count()
        self._leaves: Dict[int, Tensor] = {}
        self._leaf_ids: Dict[int, int] = {}

    def __enter__(self) -> "ComputationRecord":
        _record_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        stack = _record_stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False

    @property
    def parameters(self) -> List[Tensor]:
        return list(self._leaves.values())

    def track(self, tensor: Tensor) -> Optional[int]:
        """Node id of ``tensor`` in this record; parameters are registered on first use"""
        if tensor.record is self:
            return tensor.node_id
        if tensor.requires_grad:
            key = id(tensor)
            if key not in self._leaf_ids:
                node_id = next(self._counter)
                self._leaf_ids[key] = node_id
                self._leaves[node_id] = tensor
            return self._leaf_ids[key]
        return None

    def record_op(self, op: str, inputs: Sequence[Tensor], values: np.ndarray,
                  backward_fn: BackwardFn) -> Tensor:
        input_ids = tuple(self.track(t) for t in inputs)
        output = Tensor(values)
        if all(i is None for i in input_ids):
            return output
        output.node_id = next(self._counter)
        output.record = self
        self.nodes.append(OpNode(op, input_ids, output.node_id, backward_fn))
        return output

    def backward(self, loss: Tensor):
        """
        Propagate d(loss)/d(node) through the nodes in exact reverse order.

        Gradients accumulate into every parameter's ``grad``; calling this
        twice without zeroing doubles them.
        """
        if loss.values.size != 1:
            raise ValueError(f"backward() needs a scalar loss, got shape {loss.shape}")
        if loss.record is not self:
            raise ValueError("loss was not produced inside this computation record")

        grads: Dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.values)}
        for node in reversed(self.nodes):
            upstream = grads.pop(node.output, None)
            if upstream is None:
                continue
            for node_id, grad in zip(node.inputs, node.backward_fn(upstream)):
                if node_id is None or grad is None:
                    continue
                if node_id in grads:
                    grads[node_id] = grads[node_id] + grad
                else:
                    grads[node_id] = grad

        for node_id, leaf in self._leaves.items():
            if leaf.grad is None:
                leaf.grad = np.zeros_like(leaf.values)
            grad = grads.get(node_id)
            if grad is not None:
                leaf.grad += grad


def backward(loss: Tensor):
    """Run reverse-mode differentiation from a scalar loss"""
    if loss.values.size != 1:
        raise ValueError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if loss.record is None:
        raise ValueError("loss is not connected to any parameter (no computation record)")
    loss.record.backward(loss)


def zero_grads(parameters):
    """Reset gradients to exact zeros; required once per training step"""
    for param in parameters:
        param.zero_grad()
