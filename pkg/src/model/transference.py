"""
Transference Model
enc_src (source encoder), enc_src->mt (decoder block without causal masking,
acting as a second encoder over mt) and dec_pe (pe decoder), plus the
single-encoder configurations built from the same parts
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

import config
from src.data.examples import Batch, TripletExample, collate, pad_sequences
from src.model.layers import (
    AttentionMask,
    CrossLayerParams,
    EncoderLayerParams,
    LayerContext,
    NormParams,
    ParameterFactory,
    cross_layer,
    cross_layer_step,
    embed_tokens,
    encoder_layer,
    ffn_param_count,
    mha_param_count,
)
from src.tensor import Tensor, zero_grads
from src.tensor import functional as F

# Layer counts each architecture needs to be >= 1
_ARCHITECTURE_BLOCKS = {
    "transference": ("n_src", "n_mt", "n_pe"),
    "mt_to_pe": ("n_mt", "n_pe"),
    "concat_src_mt": ("n_src", "n_pe"),
    "src_to_pe": ("n_src", "n_pe"),
}

# Fields that define parameter shapes; checkpoints must agree on these
_STRUCTURAL_FIELDS = ("n_src", "n_mt", "n_pe", "d_model", "num_heads", "d_ff",
                      "vocab_size", "max_len", "architecture", "share_mt_pe_embeddings")


@dataclass
class ModelConfig:
    """Layer counts, dimensions and architecture switch"""
    n_src: int = config.N_SRC
    n_mt: int = config.N_MT
    n_pe: int = config.N_PE
    d_model: int = config.D_MODEL
    num_heads: int = config.NUM_HEADS
    d_ff: int = config.D_FF
    dropout: float = config.DROPOUT
    vocab_size: int = 600
    max_len: int = config.MAX_LEN
    architecture: str = config.ARCHITECTURE
    share_mt_pe_embeddings: bool = config.SHARE_MT_PE_EMBEDDINGS
    dtype: str = config.DTYPE

    def validate(self) -> "ModelConfig":
        if self.architecture not in _ARCHITECTURE_BLOCKS:
            raise ValueError(f"unknown architecture {self.architecture!r}; "
                             f"expected one of {list(_ARCHITECTURE_BLOCKS)}")
        for name in _ARCHITECTURE_BLOCKS[self.architecture]:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1 for architecture {self.architecture}, "
                                 f"got {getattr(self, name)}")
        if self.d_model % self.num_heads:
            raise ValueError(f"d_model {self.d_model} is not divisible by {self.num_heads} heads")
        if self.d_model % 2:
            raise ValueError(f"d_model must be even, got {self.d_model}")
        if self.vocab_size <= config.UNK_ID:
            raise ValueError(f"vocab_size {self.vocab_size} leaves no room beyond special tokens")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.max_len < 1 or self.d_ff < 1:
            raise ValueError("max_len and d_ff must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype}")
        return self

    @property
    def layers(self) -> Tuple[int, int, int]:
        return (self.n_src, self.n_mt, self.n_pe)

    @property
    def reads_src(self) -> bool:
        return self.architecture != "mt_to_pe"

    @property
    def reads_mt(self) -> bool:
        return self.architecture != "src_to_pe"

    @property
    def max_positions(self) -> int:
        # </s> or <s> adds one position; the concat encoder holds src + <sep> + mt
        if self.architecture == "concat_src_mt":
            return 2 * (self.max_len + 1) + 1
        return self.max_len + 1

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in known})

    def fingerprint(self) -> str:
        structural = {name: getattr(self, name) for name in _STRUCTURAL_FIELDS}
        payload = json.dumps(structural, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass
class DecoderState:
    """
    Encoder output for one (src, mt) pair, reused at every decoding step.

    ``layer_inputs`` maps a decoded prefix (with <s>) to the dec_pe layer
    inputs at each of its positions, one [t, d_model] array per layer; it
    keeps the last two prefix lengths only.
    """
    memory: np.ndarray
    memory_pad: np.ndarray
    source_length: int
    layer_inputs: Dict[Tuple[int, ...], List[np.ndarray]] = field(default_factory=dict)


class TransferenceModel:
    """
    All learned parameters of the three blocks.

    Embedding tables: src has its own table over the joint vocabulary;
    mt and pe share one table (same object when share_mt_pe_embeddings),
    which also serves as the tied output projection.
    """

    def __init__(self, model_config: ModelConfig, seed: int = config.SEED):
        self.config = model_config.validate()
        self.seed = seed
        cfg = self.config
        d, vocab = cfg.d_model, cfg.vocab_size
        factory = ParameterFactory(np.random.default_rng(seed), cfg.dtype)

        self.src_embed: Optional[Tensor] = None
        if cfg.architecture in ("transference", "src_to_pe"):
            self.src_embed = factory.matrix("src_embed", vocab, d)
        self.pe_embed = factory.matrix("pe_embed", vocab, d)
        self.mt_embed: Optional[Tensor] = None
        if cfg.reads_mt:
            self.mt_embed = (self.pe_embed if cfg.share_mt_pe_embeddings
                             else factory.matrix("mt_embed", vocab, d))

        self.enc_src: List[EncoderLayerParams] = []
        self.enc_src_norm: Optional[NormParams] = None
        if cfg.architecture != "mt_to_pe":
            self.enc_src = [EncoderLayerParams.create(factory, f"enc_src.{i}", d, cfg.d_ff)
                            for i in range(cfg.n_src)]
            self.enc_src_norm = NormParams.create(factory, "enc_src.norm", d)

        self.enc_src_mt: List[CrossLayerParams] = []
        self.enc_mt: List[EncoderLayerParams] = []
        self.second_norm: Optional[NormParams] = None
        if cfg.architecture == "transference":
            self.enc_src_mt = [CrossLayerParams.create(factory, f"enc_src_mt.{i}", d, cfg.d_ff)
                               for i in range(cfg.n_mt)]
            self.second_norm = NormParams.create(factory, "enc_src_mt.norm", d)
        elif cfg.architecture == "mt_to_pe":
            self.enc_mt = [EncoderLayerParams.create(factory, f"enc_mt.{i}", d, cfg.d_ff)
                           for i in range(cfg.n_mt)]
            self.second_norm = NormParams.create(factory, "enc_mt.norm", d)

        self.dec_pe = [CrossLayerParams.create(factory, f"dec_pe.{i}", d, cfg.d_ff)
                       for i in range(cfg.n_pe)]
        self.dec_pe_norm = NormParams.create(factory, "dec_pe.norm", d)

        self.params: Dict[str, Tensor] = factory.named

    # ------------------------------------------------------------------
    # Parameter access
    # ------------------------------------------------------------------

    def parameters(self) -> List[Tensor]:
        return list(self.params.values())

    def zero_grads(self):
        zero_grads(self.parameters())

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: tensor.values.copy() for name, tensor in self.params.items()}

    def load_state(self, arrays: Dict[str, np.ndarray]):
        """Copy arrays into the existing parameter tensors (keeps sharing intact)"""
        missing = set(self.params) - set(arrays)
        unexpected = set(arrays) - set(self.params)
        if missing or unexpected:
            raise ValueError(f"parameter names differ: missing={sorted(missing)}, "
                             f"unexpected={sorted(unexpected)}")
        for name, tensor in self.params.items():
            if arrays[name].shape != tensor.shape:
                raise ValueError(f"parameter {name}: shape {arrays[name].shape} != {tensor.shape}")
            tensor.values[...] = arrays[name]

    # ------------------------------------------------------------------
    # Blocks
    # ------------------------------------------------------------------

    def _context(self, train: bool, rng: Optional[np.random.Generator]) -> LayerContext:
        return LayerContext(num_heads=self.config.num_heads, dropout=self.config.dropout,
                            train=train, rng=rng)

    def _check_ids(self, ids: np.ndarray, side: str) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim != 2:
            raise ValueError(f"{side} ids must be a [batch, length] matrix, got shape {ids.shape}")
        if ids.shape[1] > self.config.max_positions:
            raise ValueError(f"{side} sequence of length {ids.shape[1]} exceeds the model "
                             f"limit of {self.config.max_positions} positions")
        if ids.size and (ids.max() >= self.config.vocab_size or ids.min() < 0):
            bad = int(ids.max() if ids.max() >= self.config.vocab_size else ids.min())
            raise ValueError(f"vocabulary mismatch: {side} id {bad} outside model vocabulary "
                             f"of size {self.config.vocab_size}")
        return ids

    def _run_encoder(self, ids: np.ndarray, pad: np.ndarray, table: Tensor,
                     layers: List[EncoderLayerParams], norm: NormParams,
                     ctx: LayerContext) -> Tensor:
        x = embed_tokens(table, ids, ctx, self.config.max_positions)
        mask = AttentionMask.build(causal=False, key_padding=pad)
        for layer in layers:
            x = encoder_layer(x, layer, mask, ctx)
        return F.layer_norm(x, norm.gain, norm.bias, ctx.eps)

    def encode_src(self, s: np.ndarray, pad_mask: Optional[np.ndarray] = None,
                   train: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        """enc_src: N_src unmasked (padding-only) self-attention layers over src"""
        if self.src_embed is None:
            raise ValueError(f"architecture {self.config.architecture} has no src encoder")
        s = self._check_ids(s, "src")
        pad = s == config.PAD_ID if pad_mask is None else pad_mask
        return self._run_encoder(s, pad, self.src_embed, self.enc_src, self.enc_src_norm,
                                 self._context(train, rng))

    def encode_src_mt(self, enc_src: Optional[Tensor], m: np.ndarray,
                      src_pad: Optional[np.ndarray] = None, mt_pad: Optional[np.ndarray] = None,
                      train: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        """
        enc_src->mt: N_mt layers of UNMASKED self-attention over mt, then
        cross-attention with mt-side queries over the enc_src output, then FFN.
        """
        if enc_src is None:
            raise ValueError("encode_src_mt needs the enc_src output")
        if self.config.architecture != "transference":
            raise ValueError(f"architecture {self.config.architecture} has no enc_src->mt block")
        m = self._check_ids(m, "mt")
        mt_pad = m == config.PAD_ID if mt_pad is None else mt_pad
        ctx = self._context(train, rng)
        x = embed_tokens(self.mt_embed, m, ctx, self.config.max_positions)
        self_mask = AttentionMask.build(causal=False, key_padding=mt_pad)
        memory_mask = AttentionMask.build(causal=False, key_padding=src_pad)
        for layer in self.enc_src_mt:
            x = cross_layer(x, enc_src, layer, self_mask, memory_mask, ctx)
        return F.layer_norm(x, self.second_norm.gain, self.second_norm.bias, ctx.eps)

    def encode_mt(self, m: np.ndarray, mt_pad: Optional[np.ndarray] = None,
                  train: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        """mt -> pe baseline: block 2 as a plain self-attention encoder over mt"""
        if not self.enc_mt:
            raise ValueError(f"architecture {self.config.architecture} has no mt-only encoder")
        m = self._check_ids(m, "mt")
        pad = m == config.PAD_ID if mt_pad is None else mt_pad
        return self._run_encoder(m, pad, self.mt_embed, self.enc_mt, self.second_norm,
                                 self._context(train, rng))

    def concat_inputs(self, s: np.ndarray, m: np.ndarray) -> np.ndarray:
        """Rows of src (with </s>) + <sep> + mt (with </s>), re-padded"""
        rows = []
        for src_row, mt_row in zip(np.asarray(s), np.asarray(m)):
            src_tokens = [int(t) for t in src_row if t != config.PAD_ID]
            mt_tokens = [int(t) for t in mt_row if t != config.PAD_ID]
            rows.append(src_tokens + [config.SEP_ID] + mt_tokens)
        return pad_sequences(rows)

    def encode_concat(self, s: np.ndarray, m: np.ndarray, train: bool = False,
                      rng: Optional[np.random.Generator] = None) -> Tensor:
        """{src+mt} -> pe baseline: one encoder over src <sep> mt"""
        ids = self._check_ids(self.concat_inputs(s, m), "src+mt")
        return self._run_encoder(ids, ids == config.PAD_ID, self.mt_embed, self.enc_src,
                                 self.enc_src_norm, self._context(train, rng))

    def encode(self, src: np.ndarray, mt: np.ndarray, train: bool = False,
               rng: Optional[np.random.Generator] = None) -> Tuple[Tensor, np.ndarray]:
        """Run the encoder side of the configured architecture; returns (memory, memory_pad)"""
        arch = self.config.architecture
        if arch == "transference":
            src = self._check_ids(src, "src")
            src_pad = src == config.PAD_ID
            enc_src = self.encode_src(src, src_pad, train, rng)
            memory = self.encode_src_mt(enc_src, mt, src_pad, None, train, rng)
            return memory, np.asarray(mt) == config.PAD_ID
        if arch == "mt_to_pe":
            return self.encode_mt(mt, None, train, rng), np.asarray(mt) == config.PAD_ID
        if arch == "concat_src_mt":
            ids = self.concat_inputs(src, mt)
            return self.encode_concat(src, mt, train, rng), ids == config.PAD_ID
        return self.encode_src(src, None, train, rng), np.asarray(src) == config.PAD_ID

    def decode_pe_training(self, memory: Tensor, pe_in: np.ndarray,
                           memory_pad: Optional[np.ndarray] = None,
                           train: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        """
        dec_pe over the gold pe prefix.

        Args:
            memory: final encoder representation (enc_src->mt for transference)
            pe_in: <s> + pe ids (pe shifted right)
            memory_pad: padding flags of the memory positions

        Returns:
            logits Tensor [batch, n, vocab] through the tied output projection
        """
        pe_in = self._check_ids(pe_in, "pe")
        ctx = self._context(train, rng)
        x = embed_tokens(self.pe_embed, pe_in, ctx, self.config.max_positions)
        self_mask = AttentionMask.build(causal=True, key_padding=pe_in == config.PAD_ID)
        memory_mask = AttentionMask.build(causal=False, key_padding=memory_pad)
        for layer in self.dec_pe:
            x = cross_layer(x, memory, layer, self_mask, memory_mask, ctx)
        return self._output_logits(x, ctx)

    def _output_logits(self, x: Tensor, ctx: LayerContext) -> Tensor:
        x = F.layer_norm(x, self.dec_pe_norm.gain, self.dec_pe_norm.bias, ctx.eps)
        return F.matmul(x, F.transpose(self.pe_embed, (1, 0)))

    # ------------------------------------------------------------------
    # Training objective
    # ------------------------------------------------------------------

    def forward_loss(self, example: Union[TripletExample, Batch], train: bool = False,
                     rng: Optional[np.random.Generator] = None, label_smoothing: float = 0.0,
                     normalizer: Optional[float] = None) -> Tensor:
        """Cross-entropy of pe targets given the architecture's inputs"""
        batch = collate([example]) if isinstance(example, TripletExample) else example
        if self.config.reads_src:
            self._check_ids(batch.src, "src")
        if self.config.reads_mt:
            self._check_ids(batch.mt, "mt")
        self._check_ids(batch.pe_out, "pe")
        memory, memory_pad = self.encode(batch.src, batch.mt, train, rng)
        logits = self.decode_pe_training(memory, batch.pe_in, memory_pad, train, rng)
        return F.cross_entropy_loss(logits, batch.pe_out, config.PAD_ID,
                                    label_smoothing=label_smoothing, normalizer=normalizer)

    # ------------------------------------------------------------------
    # Inference interface used by the decoders
    # ------------------------------------------------------------------

    def start_decoding(self, src: List[int], mt: List[int]) -> DecoderState:
        """Encode one (src, mt) pair given as raw ids without special tokens"""
        batch = collate([TripletExample(list(src), list(mt), [])])
        memory, memory_pad = self.encode(batch.src, batch.mt)
        return DecoderState(memory=memory.values, memory_pad=memory_pad,
                            source_length=len(mt) if self.config.reads_mt else len(src))

    def _decode_prefixes(self, memory: Tensor, memory_pad: np.ndarray,
                         prefixes: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
        """Causal pass over whole prefixes: last-position logits and each layer's inputs"""
        ctx = self._context(False, None)
        x = embed_tokens(self.pe_embed, prefixes, ctx, self.config.max_positions)
        self_mask = AttentionMask.build(causal=True, key_padding=prefixes == config.PAD_ID)
        memory_mask = AttentionMask.build(causal=False, key_padding=memory_pad)
        inputs = []
        for layer in self.dec_pe:
            inputs.append(x.values)
            x = cross_layer(x, memory, layer, self_mask, memory_mask, ctx)
        return self._output_logits(x, ctx).values[:, -1, :], inputs

    def _decode_last(self, memory: Tensor, memory_pad: np.ndarray, prefixes: np.ndarray,
                     parents: List[List[np.ndarray]]) -> Tuple[np.ndarray, List[np.ndarray]]:
        """Only the newest position, reading earlier layer inputs from ``parents``"""
        ctx = self._context(False, None)
        x = embed_tokens(self.pe_embed, prefixes[:, -1:], ctx, self.config.max_positions,
                         offset=prefixes.shape[1] - 1)
        history_mask = AttentionMask.build(causal=False, key_padding=prefixes == config.PAD_ID)
        memory_mask = AttentionMask.build(causal=False, key_padding=memory_pad)
        inputs = []
        for depth, layer in enumerate(self.dec_pe):
            history = np.concatenate([np.stack([parent[depth] for parent in parents]), x.values], axis=1)
            inputs.append(history)
            x = cross_layer_step(x, Tensor(history), memory, layer, history_mask, memory_mask, ctx)
        return self._output_logits(x, ctx).values[:, -1, :], inputs

    def step_log_probs(self, state: DecoderState, prefixes: np.ndarray) -> np.ndarray:
        """
        Next-token log probabilities [beams, vocab] for prefixes [beams, t] starting with <s>.

        When every prefix minus its last token was scored before on this
        state, only the last position is computed.
        """
        prefixes = self._check_ids(prefixes, "pe")
        beams, length = prefixes.shape
        rows = [tuple(row) for row in prefixes.tolist()]
        memory = Tensor(np.repeat(state.memory, beams, axis=0))
        memory_pad = np.repeat(state.memory_pad, beams, axis=0)

        if length == 1:
            empty = np.zeros((0, self.config.d_model), dtype=state.memory.dtype)
            parents = [[empty] * len(self.dec_pe)] * beams
        else:
            parents = [state.layer_inputs.get(row[:-1]) for row in rows]
        if any(parent is None for parent in parents):
            logits, inputs = self._decode_prefixes(memory, memory_pad, prefixes)
        else:
            logits, inputs = self._decode_last(memory, memory_pad, prefixes, parents)

        cache = {key: value for key, value in state.layer_inputs.items() if len(key) >= length - 1}
        for index, row in enumerate(rows):
            cache[row] = [layer_input[index] for layer_input in inputs]
        state.layer_inputs = cache
        return F.log_softmax_array(logits, axis=-1)

    @property
    def max_output_length(self) -> int:
        return self.config.max_len


def init_params(model_config: ModelConfig, seed: int = config.SEED) -> TransferenceModel:
    """Xavier-uniform initialized model; identical seeds give identical parameters"""
    return TransferenceModel(model_config, seed)


def count_params(model: TransferenceModel) -> int:
    return int(sum(tensor.values.size for tensor in model.parameters()))


def expected_param_count(model_config: ModelConfig) -> int:
    """Closed-form parameter total for a configuration"""
    cfg = model_config.validate()
    d, vocab = cfg.d_model, cfg.vocab_size
    mha = mha_param_count(d)
    ffn = ffn_param_count(d, cfg.d_ff)
    encoder_layer_size = mha + ffn + 2 * (2 * d)
    cross_layer_size = 2 * mha + ffn + 3 * (2 * d)
    norm = 2 * d

    tables = 1
    if cfg.architecture in ("transference", "src_to_pe"):
        tables += 1
    if cfg.reads_mt and not cfg.share_mt_pe_embeddings:
        tables += 1
    total = tables * vocab * d + cfg.n_pe * cross_layer_size + norm

    if cfg.architecture == "transference":
        total += cfg.n_src * encoder_layer_size + norm + cfg.n_mt * cross_layer_size + norm
    elif cfg.architecture == "mt_to_pe":
        total += cfg.n_mt * encoder_layer_size + norm
    else:
        total += cfg.n_src * encoder_layer_size + norm
    return total
