"""
Transformer blocks and the transference APE model
"""

from src.model.layers import (
    AttentionMask,
    MaskMode,
    multi_head_attention,
    positionwise_ffn,
    sinusoidal_positions,
    sublayer,
)
from src.model.transference import (
    ModelConfig,
    TransferenceModel,
    init_params,
    count_params,
    expected_param_count,
)

__all__ = [
    'AttentionMask',
    'MaskMode',
    'multi_head_attention',
    'positionwise_ffn',
    'sinusoidal_positions',
    'sublayer',
    'ModelConfig',
    'TransferenceModel',
    'init_params',
    'count_params',
    'expected_param_count',
]
