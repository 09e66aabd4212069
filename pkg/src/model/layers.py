"""
Transformer Sub-Layers
Multi-head attention (none / causal / padding masking), position-wise FFN,
sinusoidal positions and the residual + layer-norm wrapper
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, Optional, Tuple

import numpy as np

import config
from src.tensor import Tensor
from src.tensor import functional as F


class MaskMode(str, Enum):
    NONE = "none"
    CAUSAL = "causal"
    PADDING = "padding"
    CAUSAL_PADDING = "causal+padding"


@dataclass
class AttentionMask:
    """
    Which keys each query may see.

    ``key_padding`` is a bool array [batch, len_k] (True = pad). Padding is
    blocked in every mode once it is supplied; causal modes additionally
    block keys after the query position.
    """
    mode: MaskMode = MaskMode.NONE
    key_padding: Optional[np.ndarray] = None

    @classmethod
    def build(cls, causal: bool, key_padding: Optional[np.ndarray] = None) -> "AttentionMask":
        if causal:
            mode = MaskMode.CAUSAL_PADDING if key_padding is not None else MaskMode.CAUSAL
        else:
            mode = MaskMode.PADDING if key_padding is not None else MaskMode.NONE
        return cls(mode=mode, key_padding=key_padding)

    @property
    def causal(self) -> bool:
        return self.mode in (MaskMode.CAUSAL, MaskMode.CAUSAL_PADDING)

    def bias(self, batch: int, len_q: int, len_k: int, dtype=np.float64) -> Optional[np.ndarray]:
        """Additive logit bias [batch|1, 1, len_q, len_k]; None when nothing is blocked"""
        if self.mode in (MaskMode.PADDING, MaskMode.CAUSAL_PADDING) and self.key_padding is None:
            raise ValueError(f"mask mode {self.mode.value} needs key_padding")

        blocked = None
        if self.causal:
            if len_q != len_k:
                raise ValueError(f"causal mask needs len_q == len_k, got {len_q} and {len_k}")
            blocked = np.triu(np.ones((len_q, len_k), dtype=bool), k=1)[None, None]
        if self.key_padding is not None:
            padding = np.asarray(self.key_padding, dtype=bool)
            if padding.ndim != 2 or padding.shape[1] != len_k or padding.shape[0] not in (1, batch):
                raise ValueError(
                    f"padding mask shape {padding.shape} does not match "
                    f"(batch={batch}, len_k={len_k})"
                )
            padding = padding[:, None, None, :]
            blocked = padding if blocked is None else (blocked | padding)

        if blocked is None:
            return None
        return np.where(blocked, config.MASK_VALUE, 0.0).astype(dtype)


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

class ParameterFactory:
    """Creates named parameter tensors with Xavier-uniform initialization"""

    def __init__(self, rng: np.random.Generator, dtype: str = "float64"):
        self.rng = rng
        self.dtype = np.dtype(dtype)
        self.named: Dict[str, Tensor] = {}

    def _register(self, name: str, values: np.ndarray) -> Tensor:
        if name in self.named:
            raise ValueError(f"duplicate parameter name: {name}")
        tensor = Tensor(values.astype(self.dtype), requires_grad=True, name=name)
        self.named[name] = tensor
        return tensor

    def matrix(self, name: str, fan_in: int, fan_out: int) -> Tensor:
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        return self._register(name, self.rng.uniform(-limit, limit, size=(fan_in, fan_out)))

    def zeros(self, name: str, size: int) -> Tensor:
        return self._register(name, np.zeros(size))

    def ones(self, name: str, size: int) -> Tensor:
        return self._register(name, np.ones(size))


@dataclass
class MhaParams:
    w_q: Tensor
    b_q: Tensor
    w_k: Tensor
    b_k: Tensor
    w_v: Tensor
    b_v: Tensor
    w_o: Tensor
    b_o: Tensor

    @classmethod
    def create(cls, factory: ParameterFactory, prefix: str, d_model: int) -> "MhaParams":
        values = {}
        for proj in ("q", "k", "v", "o"):
            values[f"w_{proj}"] = factory.matrix(f"{prefix}.w_{proj}", d_model, d_model)
            values[f"b_{proj}"] = factory.zeros(f"{prefix}.b_{proj}", d_model)
        return cls(**values)


@dataclass
class FfnParams:
    w_1: Tensor
    b_1: Tensor
    w_2: Tensor
    b_2: Tensor

    @classmethod
    def create(cls, factory: ParameterFactory, prefix: str, d_model: int, d_ff: int) -> "FfnParams":
        return cls(
            w_1=factory.matrix(f"{prefix}.w_1", d_model, d_ff),
            b_1=factory.zeros(f"{prefix}.b_1", d_ff),
            w_2=factory.matrix(f"{prefix}.w_2", d_ff, d_model),
            b_2=factory.zeros(f"{prefix}.b_2", d_model),
        )


@dataclass
class NormParams:
    gain: Tensor
    bias: Tensor

    @classmethod
    def create(cls, factory: ParameterFactory, prefix: str, d_model: int) -> "NormParams":
        return cls(gain=factory.ones(f"{prefix}.gain", d_model),
                   bias=factory.zeros(f"{prefix}.bias", d_model))


@dataclass
class EncoderLayerParams:
    """Self-attention + FFN"""
    self_attn: MhaParams
    ffn: FfnParams
    norm_attn: NormParams
    norm_ffn: NormParams

    @classmethod
    def create(cls, factory, prefix: str, d_model: int, d_ff: int) -> "EncoderLayerParams":
        return cls(
            self_attn=MhaParams.create(factory, f"{prefix}.self_attn", d_model),
            ffn=FfnParams.create(factory, f"{prefix}.ffn", d_model, d_ff),
            norm_attn=NormParams.create(factory, f"{prefix}.norm_attn", d_model),
            norm_ffn=NormParams.create(factory, f"{prefix}.norm_ffn", d_model),
        )


@dataclass
class CrossLayerParams:
    """Self-attention + cross-attention + FFN (decoder-block shape)"""
    self_attn: MhaParams
    cross_attn: MhaParams
    ffn: FfnParams
    norm_attn: NormParams
    norm_cross: NormParams
    norm_ffn: NormParams

    @classmethod
    def create(cls, factory, prefix: str, d_model: int, d_ff: int) -> "CrossLayerParams":
        return cls(
            self_attn=MhaParams.create(factory, f"{prefix}.self_attn", d_model),
            cross_attn=MhaParams.create(factory, f"{prefix}.cross_attn", d_model),
            ffn=FfnParams.create(factory, f"{prefix}.ffn", d_model, d_ff),
            norm_attn=NormParams.create(factory, f"{prefix}.norm_attn", d_model),
            norm_cross=NormParams.create(factory, f"{prefix}.norm_cross", d_model),
            norm_ffn=NormParams.create(factory, f"{prefix}.norm_ffn", d_model),
        )


def mha_param_count(d_model: int) -> int:
    return 4 * (d_model * d_model + d_model)


def ffn_param_count(d_model: int, d_ff: int) -> int:
    return 2 * d_model * d_ff + d_ff + d_model


@dataclass
class LayerContext:
    """Per-forward settings shared by every sub-layer"""
    num_heads: int
    dropout: float = 0.0
    train: bool = False
    rng: Optional[np.random.Generator] = None
    eps: float = config.LAYER_NORM_EPS


# ---------------------------------------------------------------------------
# Sub-layers
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _position_table(max_len: int, d_model: int) -> np.ndarray:
    positions = np.arange(max_len)[:, None]
    rates = np.power(config.POSITION_RATE, np.arange(0, d_model, 2) / d_model)
    table = np.zeros((max_len, d_model))
    table[:, 0::2] = np.sin(positions / rates)
    table[:, 1::2] = np.cos(positions / rates)
    table.setflags(write=False)
    return table


def sinusoidal_positions(max_len: int, d_model: int) -> Tensor:
    """
    Fixed sin/cos position table.

    Even dims carry sin(pos / 10000^(2i/d)), odd dims the matching cos.
    """
    if d_model % 2:
        raise ValueError(f"d_model must be even for sinusoidal positions, got {d_model}")
    return Tensor(_position_table(max_len, d_model))


def embed_tokens(table: Tensor, ids: np.ndarray, ctx: LayerContext,
                 max_positions: int, offset: int = 0) -> Tensor:
    """Embedding x sqrt(d_model) plus positions (starting at ``offset``), then dropout"""
    ids = np.asarray(ids)
    d_model = table.shape[1]
    end = offset + ids.shape[-1]
    if end > max_positions:
        raise ValueError(f"sequence of length {end} exceeds {max_positions} positions")
    positions = _position_table(max_positions, d_model)[offset:end].astype(table.dtype)
    embedded = F.scale(F.embed_lookup(table, ids), math.sqrt(d_model))
    return F.dropout(F.add(embedded, positions), ctx.dropout, ctx.train, ctx.rng)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    return F.add(F.matmul(x, weight), bias)


def multi_head_attention(q_in: Tensor, k_in: Tensor, v_in: Tensor, params: MhaParams,
                         mask: AttentionMask, num_heads: int,
                         return_weights: bool = False):
    """
    Scaled dot-product attention over ``num_heads`` subspaces.

    Args:
        q_in: queries [batch, len_q, d_model]
        k_in, v_in: keys/values [batch, len_k, d_model]
        params: projection weights
        mask: blocked positions
        num_heads: head count h (d_model % h == 0)
        return_weights: also return the attention weights [batch, h, len_q, len_k]

    Returns:
        Tensor [batch, len_q, d_model] (and weights if requested)
    """
    batch, len_q, d_model = q_in.shape
    len_k = k_in.shape[1]
    if d_model % num_heads:
        raise ValueError(f"d_model {d_model} is not divisible by {num_heads} heads")
    if v_in.shape[1] != len_k:
        raise ValueError(f"key length {len_k} != value length {v_in.shape[1]}")
    d_k = d_model // num_heads

    def split(x: Tensor, length: int, order: Tuple[int, ...]) -> Tensor:
        return F.transpose(F.reshape(x, (batch, length, num_heads, d_k)), order)

    q = split(linear(q_in, params.w_q, params.b_q), len_q, (0, 2, 1, 3))
    k = split(linear(k_in, params.w_k, params.b_k), len_k, (0, 2, 3, 1))
    v = split(linear(v_in, params.w_v, params.b_v), len_k, (0, 2, 1, 3))

    scores = F.scale(F.matmul(q, k), 1.0 / math.sqrt(d_k))
    bias = mask.bias(batch, len_q, len_k, dtype=scores.dtype)
    if bias is not None:
        scores = F.add(scores, bias)
    weights = F.softmax(scores, axis=-1)

    context = F.transpose(F.matmul(weights, v), (0, 2, 1, 3))
    output = linear(F.reshape(context, (batch, len_q, d_model)), params.w_o, params.b_o)
    if return_weights:
        return output, weights.values
    return output


def positionwise_ffn(x: Tensor, params: FfnParams) -> Tensor:
    """max(0, xW1 + b1)W2 + b2 at every position independently"""
    return linear(F.relu(linear(x, params.w_1, params.b_1)), params.w_2, params.b_2)


def sublayer(x: Tensor, f: Callable[[Tensor], Tensor], norm: NormParams,
             ctx: LayerContext) -> Tensor:
    """Post-norm residual: layer_norm(x + dropout(f(x)))"""
    residual = F.add(x, F.dropout(f(x), ctx.dropout, ctx.train, ctx.rng))
    return F.layer_norm(residual, norm.gain, norm.bias, ctx.eps)


def encoder_layer(x: Tensor, params: EncoderLayerParams, mask: AttentionMask,
                  ctx: LayerContext) -> Tensor:
    x = sublayer(x, lambda h: multi_head_attention(h, h, h, params.self_attn, mask, ctx.num_heads),
                 params.norm_attn, ctx)
    return sublayer(x, lambda h: positionwise_ffn(h, params.ffn), params.norm_ffn, ctx)


def cross_layer(x: Tensor, memory: Tensor, params: CrossLayerParams,
                self_mask: AttentionMask, memory_mask: AttentionMask,
                ctx: LayerContext) -> Tensor:
    """
    Decoder-block layer. With a causal ``self_mask`` this is a pe decoder
    layer; with an unmasked one it is the second encoder over mt.
    """
    x = sublayer(x, lambda h: multi_head_attention(h, h, h, params.self_attn, self_mask, ctx.num_heads),
                 params.norm_attn, ctx)
    x = sublayer(x, lambda h: multi_head_attention(h, memory, memory, params.cross_attn,
                                                   memory_mask, ctx.num_heads),
                 params.norm_cross, ctx)
    return sublayer(x, lambda h: positionwise_ffn(h, params.ffn), params.norm_ffn, ctx)


def cross_layer_step(x: Tensor, history: Tensor, memory: Tensor, params: CrossLayerParams,
                     history_mask: AttentionMask, memory_mask: AttentionMask,
                     ctx: LayerContext) -> Tensor:
    """
    cross_layer for the newest position only.

    ``history`` holds this layer's inputs at every position so far, the
    newest included, so the query at the last position sees the same keys
    as under a causal mask.
    """
    x = sublayer(x, lambda h: multi_head_attention(h, history, history, params.self_attn,
                                                   history_mask, ctx.num_heads),
                 params.norm_attn, ctx)
    x = sublayer(x, lambda h: multi_head_attention(h, memory, memory, params.cross_attn,
                                                   memory_mask, ctx.num_heads),
                 params.norm_cross, ctx)
    return sublayer(x, lambda h: positionwise_ffn(h, params.ffn), params.norm_ffn, ctx)
