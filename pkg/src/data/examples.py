"""
Encoded Triplets and Padded Batches
The id-level records shared by the model, the trainer and the decoders
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

import config


@dataclass
class TripletExample:
    """One (src, mt, pe) item as token ids, without special tokens"""
    src: List[int]
    mt: List[int]
    pe: List[int]

    @property
    def longest_side(self) -> int:
        return max(len(self.src), len(self.mt), len(self.pe))

    @property
    def target_tokens(self) -> int:
        # pe tokens + </s>, i.e. the positions the loss counts
        return len(self.pe) + 1


@dataclass
class Batch:
    """
    Padded id matrices for one batch.

    src / mt end with </s>; pe_in is <s> + pe (gold decoder input) and
    pe_out is pe + </s>.
    """
    src: np.ndarray
    mt: np.ndarray
    pe_in: np.ndarray
    pe_out: np.ndarray
    indices: List[int] = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.src.shape[0]

    @property
    def src_pad(self) -> np.ndarray:
        return self.src == config.PAD_ID

    @property
    def mt_pad(self) -> np.ndarray:
        return self.mt == config.PAD_ID

    @property
    def pe_pad(self) -> np.ndarray:
        return self.pe_out == config.PAD_ID

    @property
    def target_tokens(self) -> int:
        return int((self.pe_out != config.PAD_ID).sum())


def pad_sequences(sequences: Sequence[Sequence[int]], pad_id: int = config.PAD_ID) -> np.ndarray:
    width = max(len(seq) for seq in sequences)
    matrix = np.full((len(sequences), width), pad_id, dtype=np.int64)
    for row, seq in enumerate(sequences):
        matrix[row, :len(seq)] = seq
    return matrix


def collate(examples: Sequence[TripletExample], indices: Optional[List[int]] = None) -> Batch:
    """Add special tokens and pad each side to the batch maximum"""
    if not examples:
        raise ValueError("cannot collate an empty batch")
    return Batch(
        src=pad_sequences([list(ex.src) + [config.EOS_ID] for ex in examples]),
        mt=pad_sequences([list(ex.mt) + [config.EOS_ID] for ex in examples]),
        pe_in=pad_sequences([[config.BOS_ID] + list(ex.pe) for ex in examples]),
        pe_out=pad_sequences([list(ex.pe) + [config.EOS_ID] for ex in examples]),
        indices=list(indices) if indices is not None else list(range(len(examples))),
    )
