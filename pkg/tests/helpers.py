"""Finite-difference gradient checks and corpus-file helpers for the tests"""

from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from src.tensor import ComputationRecord, Tensor


def numeric_grad(f: Callable[[], float], values: np.ndarray, h: float = 1e-5,
                 indices: Optional[Iterable[tuple]] = None) -> np.ndarray:
    """Central differences of ``f`` with respect to ``values`` (perturbed in place)"""
    grad = np.zeros_like(values)
    for index in (indices if indices is not None else np.ndindex(values.shape)):
        original = values[index]
        values[index] = original + h
        plus = f()
        values[index] = original - h
        minus = f()
        values[index] = original
        grad[index] = (plus - minus) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def max_gradient_error(build_loss: Callable[[], Tensor], params: Sequence[Tensor],
                       h: float = 1e-5, samples: Optional[int] = None, seed: int = 0) -> float:
    """
    Worst relative error between backward() and central differences.

    ``samples`` limits the number of checked entries per parameter.
    """
    for param in params:
        param.grad = None
    with ComputationRecord() as record:
        loss = build_loss()
    record.backward(loss)

    def value() -> float:
        return float(build_loss().values)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for param in params:
        analytic = np.zeros_like(param.values) if param.grad is None else param.grad.copy()
        indices = None
        if samples is not None and param.values.size > samples:
            flat = rng.choice(param.values.size, size=samples, replace=False)
            indices = [np.unravel_index(i, param.values.shape) for i in flat]
            mask = np.zeros(param.values.shape, dtype=bool)
            for index in indices:
                mask[index] = True
            analytic = np.where(mask, analytic, 0.0)
        numeric = numeric_grad(value, param.values, h, indices)
        worst = max(worst, relative_error(analytic, numeric))
    return worst


def write_corpus_files(directory: Path, name: str, corpus) -> Path:
    """Write ``corpus`` as <directory>/<name>.{src,mt,pe}; returns the prefix"""
    prefix = directory / name
    for side in ("src", "mt", "pe"):
        lines = getattr(corpus, side)
        prefix.with_name(f"{name}.{side}").write_text("".join(f"{line}\n" for line in lines),
                                                      encoding="utf-8")
    return prefix
