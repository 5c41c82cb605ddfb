"""
Minimal reverse-mode differentiation engine (float64, numpy-backed)
"""
from steerguard.autodiff.gradcheck import grad_check
from steerguard.autodiff.ops import op_forward
from steerguard.autodiff.optim import Optimizer, OptimizerState, adam_step, sgd_step
from steerguard.autodiff.tensor import (
    Function,
    Tensor,
    backward,
    backward_call_count,
    clamp,
    no_grad,
    tensor_new,
)

__all__ = [
    'Function',
    'Optimizer',
    'OptimizerState',
    'Tensor',
    'adam_step',
    'backward',
    'backward_call_count',
    'clamp',
    'grad_check',
    'no_grad',
    'op_forward',
    'sgd_step',
    'tensor_new',
]
