"""
Tensor and the reverse-mode tape.

Every op output keeps a reference to the Function that produced it; that chain of
Functions is the tape walked by backward(). All values are float64.
"""
import contextlib
import logging
import threading
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from steerguard.core.errors import GradientError, ValidationError

logger = logging.getLogger(__name__)

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, 'grad_enabled', True)


@contextlib.contextmanager
def no_grad():
    """Run ops without recording them on the tape (per thread)"""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def backward_call_count() -> int:
    """Number of backward() calls made so far by the calling thread"""
    return getattr(_state, 'backward_calls', 0)


class Tensor:
    """n-dimensional float64 array with an optional accumulated gradient"""

    def __init__(self, data, requires_grad: bool = False, creator: Optional['Function'] = None):
        self.data = np.array(data, dtype=np.float64) if creator is None else data
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.creator = creator

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ValidationError(f'item() needs a single-element tensor, got shape {self.shape}')
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> 'Tensor':
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def backward(self, inputs: Optional[Sequence['Tensor']] = None):
        backward(self, inputs=inputs)

    # Operator sugar; each maps onto a registered op
    def __add__(self, other):
        from steerguard.autodiff import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from steerguard.autodiff import ops
        return ops.sub(self, other)

    def __mul__(self, factor):
        from steerguard.autodiff import ops
        return ops.scale(self, factor)

    __rmul__ = __mul__

    def __neg__(self):
        from steerguard.autodiff import ops
        return ops.scale(self, -1.0)

    def __repr__(self):
        grad = 'set' if self.grad is not None else 'absent'
        return f'Tensor(shape={self.shape}, requires_grad={self.requires_grad}, grad={grad})'


class Function:
    """
    Base class for differentiable operations.

    Subclasses implement forward() on raw arrays and backward() returning one
    gradient (or None) per input. `needs_input_grad` tells backward() which
    input gradients are actually consumed so it can skip the rest.
    """

    def __init__(self, *tensors: Tensor):
        self.inputs = tensors
        self.needs_input_grad: Tuple[bool, ...] = tuple(True for _ in tensors)

    def forward(self, *arrays: np.ndarray, **attrs) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *tensors: Tensor, **attrs) -> Tensor:
        for t in tensors:
            if not isinstance(t, Tensor):
                raise ValidationError(f'{cls.__name__} expects Tensor inputs, got {type(t).__name__}')
        func = cls(*tensors)
        out_data = func.forward(*(t.data for t in tensors), **attrs)
        if is_grad_enabled() and any(t.requires_grad for t in tensors):
            return Tensor(out_data, requires_grad=True, creator=func)
        return Tensor(out_data, requires_grad=False, creator=_LEAF)


class _Leaf(Function):
    """Marker creator for op outputs that are not on the tape"""


_LEAF = _Leaf()


def _on_tape(t: Tensor) -> bool:
    return t.creator is not None and t.creator is not _LEAF


def tensor_new(shape: Sequence[int], values: Iterable[float], requires_grad: bool = False) -> Tensor:
    """Build a tensor from a shape and a flat row-major list of values"""
    shape = tuple(int(s) for s in shape)
    if not shape or any(s < 1 for s in shape):
        raise ValidationError(f'shape must be a non-empty list of positive extents, got {list(shape)}')
    flat = np.asarray(list(values), dtype=np.float64)
    if flat.size != int(np.prod(shape)):
        raise ValidationError(f'shape {list(shape)} needs {int(np.prod(shape))} values, got {flat.size}')
    if not np.all(np.isfinite(flat)):
        raise ValidationError('tensor values must be finite')
    return Tensor(flat.reshape(shape), requires_grad=requires_grad)


def clamp(t: Tensor, lo: float, hi: float) -> Tensor:
    """Elementwise projection onto [lo, hi]; never recorded on the tape"""
    if lo > hi:
        raise ValidationError(f'clamp bounds inverted: lo={lo} > hi={hi}')
    return Tensor(np.clip(t.data, lo, hi), requires_grad=t.requires_grad)


def _topological_order(loss: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if _on_tape(node):
            for parent in node.creator.inputs:
                if id(parent) not in visited:
                    stack.append((parent, False))
    return order  # parents before children


def backward(loss: Tensor, inputs: Optional[Sequence[Tensor]] = None):
    """
    Accumulate d(loss)/d(leaf) into `.grad` of requires_grad leaves.

    When `inputs` is given only those leaves receive gradients; other leaves
    (e.g. frozen model parameters during an attack) are left untouched.
    Gradients accumulate across calls until zeroed.
    """
    if loss.size != 1:
        raise GradientError(f'backward needs a scalar loss, got shape {loss.shape}')
    if not _on_tape(loss):
        raise GradientError('loss was not produced through recorded ops (detached input)')

    order = _topological_order(loss)
    if inputs is not None:
        targets = {id(t) for t in inputs}
    else:
        targets = {id(t) for t in order if not _on_tape(t) and t.requires_grad}
    if not targets:
        raise GradientError('no leaf requires a gradient')

    # A node needs a gradient when some target leaf lies upstream of it
    needs = {}
    for node in order:
        if not _on_tape(node):
            needs[id(node)] = id(node) in targets
        else:
            needs[id(node)] = any(needs.get(id(p), False) for p in node.creator.inputs)
    if not needs.get(id(loss)):
        raise GradientError('loss does not depend on any requested input (detached input)')

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        if not _on_tape(node):
            continue
        grad = grads.pop(id(node), None)
        if grad is None:
            continue
        func = node.creator
        func.needs_input_grad = tuple(needs.get(id(p), False) for p in func.inputs)
        input_grads = func.backward(grad)
        for parent, g in zip(func.inputs, input_grads):
            if g is None or not needs.get(id(parent), False):
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + g
            else:
                grads[id(parent)] = g

    for node in order:
        if _on_tape(node) or id(node) not in targets:
            continue
        g = grads.get(id(node))
        if g is None:
            g = np.zeros_like(node.data)
        node.grad = g.copy() if node.grad is None else node.grad + g

    _state.backward_calls = backward_call_count() + 1
