"""
Synthetic APE Triplets
A toy bilingual lexicon, pe sentences sampled from it, src as a word-by-word
mapping of pe, and mt as pe corrupted with src-dependent error patterns
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Tuple

import numpy as np

import config
from src.data.corpus import TripletCorpus

logger = logging.getLogger(__name__)

SPLITS = ("generic", "indomain")

_PE_CONSONANTS = "bdfgklmnprstvz"
_PE_VOWELS = "aeiou"
_SRC_CONSONANTS = "chjqwxy"
_SRC_VOWELS = "aeiouy"

# Share of words drawn from the split's own half of the lexicon
_DOMAIN_AFFINITY = 0.9


@dataclass
class SynthSpec:
    """
    Generator settings.

    Rates are per pe word: ``substitute`` swaps in a confusable word from the
    same cluster (the choice depends on the src word), ``drop`` deletes the
    word, ``insert`` adds a random word after it and ``swap`` exchanges it
    with its right neighbour.
    """
    lexicon_size: int = config.SYNTH_LEXICON_SIZE
    cluster_size: int = config.SYNTH_CLUSTER_SIZE
    min_words: int = config.SYNTH_MIN_WORDS
    max_words: int = config.SYNTH_MAX_WORDS
    substitute: float = 0.15
    drop: float = 0.05
    insert: float = 0.05
    swap: float = 0.05
    domain_shift: bool = False
    seed: int = config.SEED

    def validate(self) -> "SynthSpec":
        for name in ("substitute", "drop", "insert", "swap"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} rate must be in [0, 1], got {rate}")
        if self.lexicon_size < 1 or self.cluster_size < 1:
            raise ValueError("lexicon_size and cluster_size must be >= 1")
        if not 1 <= self.min_words <= self.max_words:
            raise ValueError(f"need 1 <= min_words <= max_words, got {self.min_words}..{self.max_words}")
        return self

    @property
    def is_degenerate(self) -> bool:
        no_errors = self.substitute == self.drop == self.insert == self.swap == 0.0
        return no_errors and self.lexicon_size == 1

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class Lexicon:
    pe_words: List[str]
    src_words: List[str]
    clusters: List[List[int]]   # pe word indices grouped into confusion sets
    cluster_of: List[int]


def _make_words(rng: np.random.Generator, count: int, consonants: str, vowels: str,
                taken: set) -> List[str]:
    words: List[str] = []
    syllables = 2
    attempts = 0
    while len(words) < count:
        word = "".join(consonants[rng.integers(len(consonants))] + vowels[rng.integers(len(vowels))]
                       for _ in range(syllables))
        if word not in taken:
            taken.add(word)
            words.append(word)
        attempts += 1
        if attempts > 50 * count:
            syllables += 1
            attempts = 0
    return words


def build_lexicon(spec: SynthSpec) -> Lexicon:
    """Deterministic in ``spec.seed``; shared by every split"""
    rng = np.random.default_rng([spec.seed, 0])
    taken: set = set()
    pe_words = _make_words(rng, spec.lexicon_size, _PE_CONSONANTS, _PE_VOWELS, taken)
    src_words = _make_words(rng, spec.lexicon_size, _SRC_CONSONANTS, _SRC_VOWELS, taken)
    clusters = [list(range(start, min(start + spec.cluster_size, spec.lexicon_size)))
                for start in range(0, spec.lexicon_size, spec.cluster_size)]
    cluster_of = [0] * spec.lexicon_size
    for number, members in enumerate(clusters):
        for word in members:
            cluster_of[word] = number
    return Lexicon(pe_words, src_words, clusters, cluster_of)


def _confusion(lexicon: Lexicon, word: int) -> int:
    """The wrong word MT produces for ``word``, selected by its src translation"""
    members = lexicon.clusters[lexicon.cluster_of[word]]
    if len(members) == 1:
        return word
    others = [m for m in members if m != word]
    key = sum(ord(ch) for ch in lexicon.src_words[word])
    return others[key % len(others)]


def _word_weights(spec: SynthSpec, split: str) -> np.ndarray:
    ranks = np.arange(spec.lexicon_size)
    weights = 1.0 / (1.0 + ranks % max(spec.cluster_size, 1)) ** 0.5
    if spec.domain_shift and spec.lexicon_size > 1:
        half = spec.lexicon_size // 2
        own = ranks < half if split == "generic" else ranks >= half
        weights = weights * np.where(own, _DOMAIN_AFFINITY, 1.0 - _DOMAIN_AFFINITY)
    return weights / weights.sum()


def _corrupt(pe: List[int], spec: SynthSpec, lexicon: Lexicon,
             rng: np.random.Generator, weights: np.ndarray) -> List[int]:
    mt: List[int] = []
    for word in pe:
        if rng.random() < spec.drop:
            continue
        mt.append(_confusion(lexicon, word) if rng.random() < spec.substitute else word)
        if rng.random() < spec.insert:
            mt.append(int(rng.choice(spec.lexicon_size, p=weights)))
    position = 0
    while position < len(mt) - 1:
        if rng.random() < spec.swap:
            mt[position], mt[position + 1] = mt[position + 1], mt[position]
            position += 2
        else:
            position += 1
    return mt


def gen_synthetic(spec: SynthSpec, n: int, split: str = "generic", stream: int = 0) -> TripletCorpus:
    """
    Generate ``n`` triplets.

    Args:
        spec: generator settings
        n: number of triplets
        split: "generic" or "indomain"; differs only with ``spec.domain_shift``
        stream: independent sample stream (e.g. 0 train, 1 dev, 2 test)

    Returns:
        TripletCorpus; identical for identical (spec, n, split, stream)
    """
    spec.validate()
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}; expected one of {SPLITS}")
    if spec.is_degenerate:
        logger.warning("Degenerate synthetic spec: one-word lexicon and no corruption; "
                       "every triplet will be trivial")
    if spec.substitute > 0 and spec.cluster_size == 1:
        logger.warning("cluster_size=1 leaves no confusable words; substitutions are no-ops")

    lexicon = build_lexicon(spec)
    weights = _word_weights(spec, split)
    rng = np.random.default_rng([spec.seed, 1 + SPLITS.index(split), stream])

    src_lines, mt_lines, pe_lines = [], [], []
    for _ in range(n):
        length = int(rng.integers(spec.min_words, spec.max_words + 1))
        pe = [int(w) for w in rng.choice(spec.lexicon_size, size=length, p=weights)]
        mt = _corrupt(pe, spec, lexicon, rng, weights)
        src_lines.append(" ".join(lexicon.src_words[w] for w in pe))
        mt_lines.append(" ".join(lexicon.pe_words[w] for w in mt))
        pe_lines.append(" ".join(lexicon.pe_words[w] for w in pe))

    provenance = f"synthetic seed={spec.seed} split={split} stream={stream} n={n}"
    return TripletCorpus(src_lines, mt_lines, pe_lines, provenance=provenance)


def expected_ter(spec: SynthSpec) -> float:
    """
    First-order TER(mt, pe) estimate from the rates: each dropped word needs
    an insertion, each substitution or inserted word one edit, and each
    adjacent swap one shift.
    """
    spec.validate()
    substitute = spec.substitute if spec.cluster_size > 1 else 0.0
    kept = 1.0 - spec.drop
    return spec.drop + kept * (substitute + spec.insert) + kept * spec.swap


def split_sizes(n: int, dev_fraction: float) -> Tuple[int, int]:
    dev = max(1, int(round(n * dev_fraction)))
    return n - dev, dev
