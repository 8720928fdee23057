"""
Dense float64 tensors with reverse-mode automatic differentiation.

A `Tensor` produced by an operation keeps references to its parents and a
closure computing the parents' gradients from its own. `Graph` orders the
recorded nodes topologically and runs those closures once each, in reverse.
"""

import logging
import threading
from collections import Counter
from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import GraphError, NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

# Graph recording and op tracing are per thread so independent graphs can
# be built concurrently.
_local = threading.local()


def _grad_enabled() -> bool:
    return getattr(_local, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Run operations without recording a differentiation graph"""
    previous = _grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = previous


@contextmanager
def trace_ops() -> Iterator[Counter]:
    """Count op and layer events executed inside the block"""
    counter: Counter = Counter()
    stack = getattr(_local, "tracers", None)
    if stack is None:
        stack = _local.tracers = []
    stack.append(counter)
    try:
        yield counter
    finally:
        stack.remove(counter)


def record_event(name: str):
    """Increment `name` on every active tracer"""
    for counter in getattr(_local, "tracers", ()):
        counter[name] += 1


class Tensor:
    """n-dimensional float64 array that can take part in a recorded graph"""

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64)
        if any(extent <= 0 for extent in self.data.shape):
            raise ShapeError(f"tensor extents must be positive, got {self.data.shape}")
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._op: Optional[str] = None
        self._parents: Tuple["Tensor", ...] = ()
        self._backward_fn: Optional[BackwardFn] = None
        self._consumed = False

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence["Tensor"],
                backward_fn: BackwardFn, op: str) -> "Tensor":
        """Wrap an op result, recording the graph edge when needed"""
        if not np.all(np.isfinite(data)):
            raise NonFiniteError(op)
        record_event(op)
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        out._op = op
        out._consumed = False
        out.requires_grad = _grad_enabled() and any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward_fn = backward_fn
        else:
            out._parents = ()
            out._backward_fn = None
        return out

    # Introspection

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._backward_fn is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        label = f" '{self.name}'" if self.name else ""
        return f"Tensor{label}(shape={self.shape}{flag})"

    # Arithmetic

    def _binary(self, other, op: str):
        if isinstance(other, Tensor):
            if other.shape != self.shape:
                raise ShapeError(f"{op}: shapes {self.shape} and {other.shape} differ")
            return other
        return Tensor(np.full(self.shape, float(other)))

    def __add__(self, other) -> "Tensor":
        other = self._binary(other, "add")
        return Tensor.from_op(self.data + other.data, (self, other),
                              lambda g: (g, g), "add")

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        other = self._binary(other, "sub")
        return Tensor.from_op(self.data - other.data, (self, other),
                              lambda g: (g, -g), "sub")

    def __rsub__(self, other) -> "Tensor":
        return self._binary(other, "sub") - self

    def __neg__(self) -> "Tensor":
        return Tensor.from_op(-self.data, (self,), lambda g: (-g,), "neg")

    def __mul__(self, other) -> "Tensor":
        other = self._binary(other, "mul")
        a, b = self.data, other.data
        return Tensor.from_op(a * b, (self, other), lambda g: (g * b, g * a), "mul")

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "Tensor":
        if isinstance(scalar, Tensor):
            raise TypeError("division is only defined by a python scalar")
        return self * (1.0 / scalar)

    def sum(self) -> "Tensor":
        shape = self.shape
        return Tensor.from_op(np.array(self.data.sum()), (self,),
                              lambda g: (np.full(shape, float(g)),), "sum")

    def mean(self) -> "Tensor":
        return self.sum() / self.size

    def backward(self) -> int:
        return backward(self)


class Graph:
    """Recorded nodes reachable from an output, in topological order"""

    def __init__(self, nodes: List[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_output(cls, output: Tensor) -> "Graph":
        order: List[Tensor] = []
        visited = set()
        stack = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return cls(order)

    def __len__(self):
        return len(self.nodes)

    def backward(self, seed: np.ndarray) -> int:
        """Propagate `seed` from the last node; returns the number of nodes visited"""
        pending = {id(self.nodes[-1]): seed}
        visited = 0
        for node in reversed(self.nodes):
            grad = pending.pop(id(node), None)
            visited += 1
            if grad is None:
                continue
            if node.is_leaf:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            parent_grads = node._backward_fn(grad)
            for parent, parent_grad in zip(node._parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = parent_grad if key not in pending else pending[key] + parent_grad
            # Saved intermediates are released; the graph cannot be replayed.
            node._backward_fn = None
            node._parents = ()
            node._consumed = True
        return visited


def backward(loss: Tensor) -> int:
    """Populate `.grad` on every requires_grad leaf reachable from `loss`"""
    if loss.size != 1:
        raise GraphError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._consumed:
        raise GraphError("graph already consumed by a previous backward pass; run a new forward")
    if not loss.requires_grad:
        raise GraphError("loss is detached from any recorded graph")
    graph = Graph.from_output(loss)
    visited = graph.backward(np.ones_like(loss.data))
    if loss.is_leaf:
        loss._consumed = True
    logger.debug("backward visited %d nodes", visited)
    return visited
