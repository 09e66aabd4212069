"""
Differentiable Operations
Exactly the kit the transformer stack needs: matmul, softmax, layer norm,
relu, dropout, embedding lookup, cross-entropy and elementwise arithmetic
"""

from typing import Optional, Sequence, Union

import numpy as np

from src.tensor.autodiff import Tensor, active_record

ArrayLike = Union[Tensor, np.ndarray, float, int]


def _emit(op: str, inputs: Sequence[Tensor], values: np.ndarray, backward_fn) -> Tensor:
    record = active_record()
    if record is None:
        return Tensor(values)
    return record.record_op(op, inputs, values, backward_fn)


def as_tensor(value: ArrayLike, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting"""
    if grad.shape == tuple(shape):
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# Elementwise kit
# ---------------------------------------------------------------------------

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a = as_tensor(a, b if isinstance(b, Tensor) else None)
    b = as_tensor(b, a)
    shape_a, shape_b = a.shape, b.shape

    def backward_fn(grad):
        return unbroadcast(grad, shape_a), unbroadcast(grad, shape_b)

    return _emit("add", (a, b), a.values + b.values, backward_fn)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a = as_tensor(a, b if isinstance(b, Tensor) else None)
    b = as_tensor(b, a)
    shape_a, shape_b = a.shape, b.shape

    def backward_fn(grad):
        return unbroadcast(grad, shape_a), unbroadcast(-grad, shape_b)

    return _emit("sub", (a, b), a.values - b.values, backward_fn)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a = as_tensor(a, b if isinstance(b, Tensor) else None)
    b = as_tensor(b, a)
    a_values, b_values = a.values, b.values

    def backward_fn(grad):
        return (unbroadcast(grad * b_values, a_values.shape),
                unbroadcast(grad * a_values, b_values.shape))

    return _emit("mul", (a, b), a_values * b_values, backward_fn)


def scale(x: Tensor, factor: float) -> Tensor:
    def backward_fn(grad):
        return (grad * factor,)

    return _emit("scale", (x,), x.values * factor, backward_fn)


def relu(x: Tensor) -> Tensor:
    active = x.values > 0

    def backward_fn(grad):
        return (grad * active,)

    return _emit("relu", (x,), np.where(active, x.values, 0.0).astype(x.dtype), backward_fn)


def dropout(x: Tensor, rate: float, train: bool,
            rng: Optional[np.random.Generator] = None) -> Tensor:
    """Inverted dropout: survivors scaled by 1/(1-rate); identity in eval"""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)

    def backward_fn(grad):
        return (grad * keep,)

    return _emit("dropout", (x,), x.values * keep, backward_fn)


def tensor_sum(x: Tensor) -> Tensor:
    shape = x.shape

    def backward_fn(grad):
        return (np.broadcast_to(grad, shape).copy(),)

    return _emit("sum", (x,), np.asarray(x.values.sum()), backward_fn)


# ---------------------------------------------------------------------------
# Shape ops
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product; batch dimensions broadcast"""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ValueError(f"matmul batch dimensions not broadcastable: {a.shape} @ {b.shape}")
    a_values, b_values = a.values, b.values

    def backward_fn(grad):
        grad_a = np.matmul(grad, np.swapaxes(b_values, -1, -2))
        grad_b = np.matmul(np.swapaxes(a_values, -1, -2), grad)
        return unbroadcast(grad_a, a_values.shape), unbroadcast(grad_b, b_values.shape)

    return _emit("matmul", (a, b), np.matmul(a_values, b_values), backward_fn)


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward_fn(grad):
        return (np.transpose(grad, inverse),)

    return _emit("transpose", (x,), np.transpose(x.values, axes), backward_fn)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    original = x.shape

    def backward_fn(grad):
        return (grad.reshape(original),)

    return _emit("reshape", (x,), x.values.reshape(tuple(shape)), backward_fn)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def softmax_array(values: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = values - values.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=axis, keepdims=True)


def log_softmax_array(values: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = values - values.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-subtracted softmax along ``axis``"""
    if not -x.ndim <= axis < x.ndim:
        raise ValueError(f"softmax axis {axis} invalid for shape {x.shape}")
    probs = softmax_array(x.values, axis)

    def backward_fn(grad):
        inner = (grad * probs).sum(axis=axis, keepdims=True)
        return (probs * (grad - inner),)

    return _emit("softmax", (x,), probs, backward_fn)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize over the last axis, then apply gain and bias"""
    values = x.values
    mean = values.mean(axis=-1, keepdims=True)
    centered = values - mean
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    normed = centered * inv_std
    gain_values = gain.values
    width = values.shape[-1]
    reduce_axes = tuple(range(values.ndim - 1))

    def backward_fn(grad):
        grad_normed = grad * gain_values
        grad_x = inv_std / width * (
            width * grad_normed
            - grad_normed.sum(axis=-1, keepdims=True)
            - normed * (grad_normed * normed).sum(axis=-1, keepdims=True)
        )
        grad_gain = (grad * normed).sum(axis=reduce_axes)
        grad_bias = grad.sum(axis=reduce_axes)
        return grad_x, grad_gain, grad_bias

    return _emit("layer_norm", (x, gain, bias), normed * gain_values + bias.values, backward_fn)


# ---------------------------------------------------------------------------
# Lookup and loss
# ---------------------------------------------------------------------------

def embed_lookup(table: Tensor, ids) -> Tensor:
    """Rows of ``table`` for every id; backward scatters into the table rows"""
    ids = np.asarray(ids, dtype=np.int64)
    vocab = table.shape[0]
    invalid = (ids < 0) | (ids >= vocab)
    if invalid.any():
        offending = int(ids[invalid].reshape(-1)[0])
        raise ValueError(f"token id {offending} outside vocabulary of size {vocab}")
    table_shape = table.shape

    def backward_fn(grad):
        grad_table = np.zeros(table_shape, dtype=grad.dtype)
        np.add.at(grad_table, ids.reshape(-1), grad.reshape(-1, table_shape[1]))
        return (grad_table,)

    return _emit("embed", (table,), table.values[ids], backward_fn)


def cross_entropy_loss(logits: Tensor, targets, pad_id: int,
                       label_smoothing: float = 0.0,
                       normalizer: Optional[float] = None) -> Tensor:
    """
    Label-smoothed negative log-likelihood over non-pad positions.

    Args:
        logits: Tensor[..., vocab]
        targets: integer ids, one per logits position
        pad_id: id whose positions are excluded
        label_smoothing: mass spread uniformly over the vocabulary
        normalizer: divisor for the summed loss; defaults to the number of
            non-pad targets. Gradient accumulation passes the token count of
            the whole step here.

    Returns:
        Scalar Tensor
    """
    vocab = logits.shape[-1]
    flat = logits.values.reshape(-1, vocab)
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if targets.shape[0] != flat.shape[0]:
        raise ValueError(f"{targets.shape[0]} targets for {flat.shape[0]} logit positions")
    if ((targets < 0) | (targets >= vocab)).any():
        raise ValueError(f"target id outside vocabulary of size {vocab}")
    mask = targets != pad_id
    count = int(mask.sum())
    if count == 0:
        raise ValueError("all targets are padding; mean loss is undefined")
    if normalizer is None:
        normalizer = count

    log_probs = log_softmax_array(flat, axis=-1)
    smoothed = np.full(flat.shape, label_smoothing / vocab, dtype=flat.dtype)
    smoothed[np.arange(flat.shape[0]), targets] += 1.0 - label_smoothing
    smoothed *= mask[:, None]
    loss = -(smoothed * log_probs).sum() / normalizer
    logits_shape = logits.shape

    def backward_fn(grad):
        probs = np.exp(log_probs) * mask[:, None]
        return ((grad * (probs - smoothed) / normalizer).reshape(logits_shape),)

    return _emit("cross_entropy", (logits,), np.asarray(loss, dtype=flat.dtype), backward_fn)
