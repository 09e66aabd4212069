"""
Learning-Rate Schedule
Linear warmup followed by inverse square-root decay
"""

import math

import config


def noam_lr(step: int, d_model: int, warmup_steps: int = config.WARMUP_STEPS,
            scale: float = config.LR_SCALE) -> float:
    """
    scale * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)

    Both branches meet at ``step == warmup_steps``, which is the peak.

    Args:
        step: 1-based optimizer step
        d_model: model width
        warmup_steps: steps of linear increase
        scale: constant multiplier

    Returns:
        Learning rate for this step
    """
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    if warmup_steps < 1:
        raise ValueError(f"warmup_steps must be >= 1, got {warmup_steps}")
    if d_model < 1:
        raise ValueError(f"d_model must be >= 1, got {d_model}")
    return scale * d_model ** -0.5 * min(step ** -0.5, step * warmup_steps ** -1.5)


def peak_lr(d_model: int, warmup_steps: int = config.WARMUP_STEPS,
            scale: float = config.LR_SCALE) -> float:
    return scale / math.sqrt(d_model * warmup_steps)
