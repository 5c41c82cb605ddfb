"""
Adam and SGD updates over lists of parameter tensors.

Updates are applied in place to `param.data`; gradients are left for the caller
to zero.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from steerguard.autodiff.tensor import Tensor
from steerguard.core.errors import GradientError, ValidationError

ADAM = 'adam'
SGD = 'sgd'


@dataclass
class OptimizerState:
    kind: str
    learning_rate: float
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    first_moments: Dict[int, np.ndarray] = field(default_factory=dict)
    second_moments: Dict[int, np.ndarray] = field(default_factory=dict)
    step_count: int = 0

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in (ADAM, SGD):
            raise ValidationError(f'optimizer kind must be adam or sgd, got {self.kind!r}')
        if self.learning_rate < 0:
            raise ValidationError(f'learning rate must be >= 0, got {self.learning_rate}')


def _check_grads(params: Sequence[Tensor]):
    for index, p in enumerate(params):
        if p.grad is None:
            raise GradientError(f'parameter {index} has no gradient; call backward() first')
        if p.grad.shape != p.data.shape:
            raise GradientError(f'parameter {index}: grad shape {p.grad.shape} != data shape {p.data.shape}')


def adam_step(params: Sequence[Tensor], state: OptimizerState):
    """One bias-corrected Adam update"""
    if state.kind != ADAM:
        raise ValidationError(f'adam_step called with a {state.kind} state')
    _check_grads(params)
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.adam_beta1, state.adam_beta2
    for index, p in enumerate(params):
        m = state.first_moments.get(index)
        v = state.second_moments.get(index)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        elif m.shape != p.data.shape:
            raise ValidationError(f'moment shape {m.shape} does not match parameter {index} {p.data.shape}')
        g = p.grad
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.first_moments[index] = m
        state.second_moments[index] = v
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        p.data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.adam_epsilon)
    return params, state


def sgd_step(params: Sequence[Tensor], state: OptimizerState):
    """Plain gradient descent: p <- p - lr * grad"""
    if state.kind != SGD:
        raise ValidationError(f'sgd_step called with a {state.kind} state')
    _check_grads(params)
    state.step_count += 1
    for p in params:
        p.data -= state.learning_rate * p.grad
    return params, state


class Optimizer:
    """Binds a parameter list to an OptimizerState"""

    def __init__(self, params: Sequence[Tensor], kind: str = ADAM, learning_rate: float = 0.001):
        self.params: List[Tensor] = list(params)
        self.state = OptimizerState(kind=kind, learning_rate=learning_rate)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        if self.state.kind == ADAM:
            adam_step(self.params, self.state)
        else:
            sgd_step(self.params, self.state)
