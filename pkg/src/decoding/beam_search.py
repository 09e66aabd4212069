"""
Beam Search and Greedy Decoding
Generates pe token ids from (src, mt) with one model or an ensemble
"""

import logging
from dataclasses import dataclass
from typing import Any, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

import config

logger = logging.getLogger(__name__)

ENSEMBLE_MODES = ("prob", "log")


class DecodingModel(Protocol):
    """What the search needs from a model: an encoder pass and next-token scores"""

    def start_decoding(self, src: List[int], mt: List[int]) -> Any: ...

    def step_log_probs(self, state: Any, prefixes: np.ndarray) -> np.ndarray: ...

    @property
    def max_output_length(self) -> int: ...


@dataclass(frozen=True)
class BeamHypothesis:
    """Partial or finished output; ``tokens`` excludes <s> and </s>"""
    tokens: Tuple[int, ...] = ()
    log_prob: float = 0.0
    finished: bool = False

    def extend(self, token: int, token_log_prob: float) -> "BeamHypothesis":
        if self.finished:
            raise ValueError("cannot extend a finished hypothesis")
        if token == config.EOS_ID:
            return BeamHypothesis(self.tokens, self.log_prob + token_log_prob, finished=True)
        return BeamHypothesis(self.tokens + (int(token),), self.log_prob + token_log_prob)

    @property
    def length(self) -> int:
        # </s> counts as an output position once finished
        return len(self.tokens) + (1 if self.finished else 0)

    def score(self, length_penalty: float = config.LENGTH_PENALTY) -> float:
        return self.log_prob / max(self.length, 1) ** length_penalty


class ModelEnsemble:
    """
    Averages member next-token distributions.

    ``mode="prob"`` averages probabilities (then takes the log); ``mode="log"``
    averages log probabilities and renormalizes. A member may itself be a
    list of models, which is averaged first and then counts as one member.
    """

    def __init__(self, members: Sequence[Union[DecodingModel, Sequence]], mode: str = "prob"):
        if not members:
            raise ValueError("an ensemble needs at least one model")
        if mode not in ENSEMBLE_MODES:
            raise ValueError(f"unknown ensemble mode {mode!r}; expected one of {ENSEMBLE_MODES}")
        self.members: List[DecodingModel] = [
            ModelEnsemble(member, mode) if isinstance(member, (list, tuple)) else member
            for member in members
        ]
        self.mode = mode
        vocab_sizes = {size for size in (_vocab_size(m) for m in self.members) if size is not None}
        if len(vocab_sizes) > 1:
            raise ValueError(f"ensemble members disagree on vocabulary size: {sorted(vocab_sizes)}")

    @property
    def vocab_size(self) -> Optional[int]:
        return _vocab_size(self.members[0])

    @property
    def max_output_length(self) -> int:
        return min(member.max_output_length for member in self.members)

    def start_decoding(self, src: List[int], mt: List[int]) -> List[Any]:
        return [member.start_decoding(src, mt) for member in self.members]

    def step_log_probs(self, state: List[Any], prefixes: np.ndarray) -> np.ndarray:
        stacked = np.stack([member.step_log_probs(member_state, prefixes)
                            for member, member_state in zip(self.members, state)])
        if len(self.members) == 1:
            return stacked[0]
        # sorted over members so the result does not depend on member order
        stacked = np.sort(stacked, axis=0)
        if self.mode == "log":
            mean = stacked.mean(axis=0)
            top = mean.max(axis=-1, keepdims=True)
            return mean - (top + np.log(np.exp(mean - top).sum(axis=-1, keepdims=True)))
        top = stacked.max(axis=0)
        return top + np.log(np.exp(stacked - top).mean(axis=0))


def _vocab_size(model) -> Optional[int]:
    if isinstance(model, ModelEnsemble):
        return model.vocab_size
    model_config = getattr(model, "config", None)
    return getattr(model_config, "vocab_size", None)


def as_decoder(models, ensemble_mode: str = "prob") -> DecodingModel:
    """A single model stays as is; a list (possibly nested) becomes an ensemble"""
    if isinstance(models, (list, tuple)):
        if not models:
            raise ValueError("no models given for decoding")
        if len(models) == 1 and not isinstance(models[0], (list, tuple)):
            return models[0]
        return ModelEnsemble(models, ensemble_mode)
    return models


def default_max_len(decoder: DecodingModel, mt: Sequence[int]) -> int:
    return min(len(mt) + config.MAX_LEN_OFFSET, decoder.max_output_length)


def greedy_decode(model, src: Sequence[int], mt: Sequence[int],
                  max_len: Optional[int] = None) -> List[int]:
    """Arg-max token per step until </s> or ``max_len`` tokens"""
    decoder = as_decoder(model)
    max_len = default_max_len(decoder, mt) if max_len is None else min(max_len, decoder.max_output_length)
    state = decoder.start_decoding(list(src), list(mt))
    tokens: List[int] = []
    for _ in range(max_len + 1):
        prefix = np.asarray([[config.BOS_ID] + tokens], dtype=np.int64)
        token = int(np.argmax(decoder.step_log_probs(state, prefix)[0]))
        if token == config.EOS_ID:
            break
        if len(tokens) == max_len:
            break
        tokens.append(token)
    return tokens


def beam_search_hypotheses(models, src: Sequence[int], mt: Sequence[int],
                           beam_size: int = config.BEAM_SIZE, max_len: Optional[int] = None,
                           length_penalty: float = config.LENGTH_PENALTY,
                           ensemble_mode: str = "prob") -> List[BeamHypothesis]:
    """
    Run the search and return finished hypotheses, best first.

    At each step every alive hypothesis is expanded over the full
    vocabulary; the top ``beam_size`` candidates are kept, and those ending
    in </s> move to the finished pool. Search ends once the pool holds
    ``beam_size`` hypotheses or ``max_len`` tokens have been produced;
    hypotheses still alive then are closed without </s>.
    """
    if beam_size < 1:
        raise ValueError(f"beam_size must be >= 1, got {beam_size}")
    decoder = as_decoder(models, ensemble_mode)
    max_len = default_max_len(decoder, mt) if max_len is None else min(max_len, decoder.max_output_length)
    state = decoder.start_decoding(list(src), list(mt))

    alive = [BeamHypothesis()]
    finished: List[BeamHypothesis] = []
    for position in range(max_len + 1):
        prefixes = np.asarray([[config.BOS_ID, *hyp.tokens] for hyp in alive], dtype=np.int64)
        log_probs = decoder.step_log_probs(state, prefixes)
        if position == max_len:
            # only </s> may follow a full-length prefix
            for row, hyp in enumerate(alive):
                finished.append(hyp.extend(config.EOS_ID, float(log_probs[row, config.EOS_ID])))
            alive = []
            break

        scores = np.asarray([hyp.log_prob for hyp in alive])[:, None] + log_probs
        order = np.argsort(-scores.reshape(-1), kind="stable")[:beam_size]
        vocab = log_probs.shape[1]
        next_alive = []
        for flat in order:
            row, token = divmod(int(flat), vocab)
            candidate = alive[row].extend(token, float(log_probs[row, token]))
            (finished if candidate.finished else next_alive).append(candidate)
        alive = next_alive
        if len(finished) >= beam_size or not alive:
            break

    if not finished:
        finished = [BeamHypothesis(hyp.tokens, hyp.log_prob, finished=False) for hyp in alive]
    return sorted(finished, key=lambda hyp: -hyp.score(length_penalty))


def beam_search(models, src: Sequence[int], mt: Sequence[int],
                beam_size: int = config.BEAM_SIZE, max_len: Optional[int] = None,
                length_penalty: float = config.LENGTH_PENALTY,
                ensemble_mode: str = "prob") -> List[int]:
    """
    Best pe token ids after length normalization (score / length^alpha).

    Args:
        models: one model, a list of models, or a list with nested groups
        src, mt: raw ids without special tokens
        beam_size: hypotheses kept per step
        max_len: output token limit; defaults to len(mt) + 50, clamped to
            what the model can represent
        length_penalty: alpha in the length normalization
        ensemble_mode: "prob" or "log" averaging across ensemble members

    Returns:
        Token ids without <s> / </s>
    """
    hypotheses = beam_search_hypotheses(models, src, mt, beam_size, max_len,
                                        length_penalty, ensemble_mode)
    return list(hypotheses[0].tokens)
