"""
Minimal dense tensor with reverse-mode automatic differentiation
"""

from src.tensor.autodiff import (
    Tensor,
    ComputationRecord,
    OpNode,
    active_record,
    backward,
    zero_grads,
)
from src.tensor import functional

__all__ = [
    'Tensor',
    'ComputationRecord',
    'OpNode',
    'active_record',
    'backward',
    'zero_grads',
    'functional',
]
