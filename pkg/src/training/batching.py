"""
Token-Bucketed Batching
Shuffled, length-sorted chunks packed up to a target-side token budget
"""

import logging
from typing import Iterator, List, Sequence, Tuple

import numpy as np

import config
from src.data.examples import Batch, TripletExample, collate

logger = logging.getLogger(__name__)


def filter_by_length(examples: Sequence[TripletExample], max_len: int) -> Tuple[List[int], int]:
    """Indices of examples whose every side fits ``max_len``, plus the dropped count"""
    kept = [i for i, ex in enumerate(examples) if ex.longest_side <= max_len]
    dropped = len(examples) - len(kept)
    if dropped:
        logger.warning("Dropped %d of %d examples longer than %d subwords",
                       dropped, len(examples), max_len)
    return kept, dropped


def make_batches(corpus: Sequence[TripletExample], token_budget: int, max_len: int,
                 epoch_seed: int, chunk_size: int = config.SHUFFLE_CHUNK) -> Iterator[Batch]:
    """
    Yield one epoch of batches.

    The corpus is permuted with ``epoch_seed``, cut into chunks, each chunk
    sorted by pe length, and batches are filled greedily while the sum of
    target tokens stays within ``token_budget``. Every admissible example
    appears exactly once.

    Args:
        corpus: encoded triplets
        token_budget: max target-side tokens (pe + </s>) per batch
        max_len: max subwords on any side; longer examples are dropped
        epoch_seed: seed for this epoch's permutation
        chunk_size: examples per length-sorted chunk

    Yields:
        Batch objects
    """
    if len(corpus) == 0:
        raise ValueError("cannot batch an empty corpus")
    if token_budget < max_len + 1:
        raise ValueError(f"token budget {token_budget} is below the longest admissible "
                         f"sequence ({max_len + 1} target tokens)")

    kept, _ = filter_by_length(corpus, max_len)
    rng = np.random.default_rng(epoch_seed)
    order = [kept[i] for i in rng.permutation(len(kept))]

    for start in range(0, len(order), chunk_size):
        chunk = sorted(order[start:start + chunk_size], key=lambda i: len(corpus[i].pe))
        current: List[int] = []
        tokens = 0
        for index in chunk:
            needed = corpus[index].target_tokens
            if current and tokens + needed > token_budget:
                yield collate([corpus[i] for i in current], current)
                current, tokens = [], 0
            current.append(index)
            tokens += needed
        if current:
            yield collate([corpus[i] for i in current], current)
