"""
Evaluation Metrics for Post-Editing Output
Includes: corpus BLEU, TER with shift search and per-operation edit counts
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Sequence, Tuple, Union

from sacrebleu.metrics import BLEU

import config

Tokens = Union[str, Sequence[str]]

SMOOTHING_METHODS = ("auto", "add_one", "none")


def _tokens(text: Tokens, lowercase: bool = False) -> Tuple[str, ...]:
    tokens = text.split() if isinstance(text, str) else [str(t) for t in text]
    if lowercase:
        tokens = [t.lower() for t in tokens]
    return tuple(tokens)


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------

@dataclass
class BleuResult:
    score: float
    precisions: List[float] = field(default_factory=list)
    brevity_penalty: float = 0.0
    hyp_length: int = 0
    ref_length: int = 0


def bleu_corpus(hyps: Sequence[Tokens], refs: Sequence[Tokens], max_n: int = config.BLEU_MAX_N,
                smoothing: str = config.BLEU_SMOOTHING, lowercase: bool = False) -> BleuResult:
    """
    Corpus-level BLEU (one reference per hypothesis), 0-100.

    N-gram matches are pooled over the corpus before the geometric mean.
    ``smoothing="add_one"`` adds one to matches and totals for n > 1;
    ``"auto"`` does so only when some order n > 1 has no match at all,
    which would otherwise zero the score.

    Args:
        hyps: hypothesis sentences (strings or token lists)
        refs: reference sentences, aligned with hyps
        max_n: highest n-gram order
        smoothing: "auto", "add_one" or "none"
        lowercase: compare case-insensitively
    """
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses for {len(refs)} references")
    if not hyps:
        raise ValueError("cannot compute BLEU on an empty corpus")
    if smoothing not in SMOOTHING_METHODS:
        raise ValueError(f"unknown smoothing {smoothing!r}; expected one of {list(SMOOTHING_METHODS)}")

    hyp_lines = [" ".join(_tokens(h)) for h in hyps]
    ref_lines = [" ".join(_tokens(r)) for r in refs]
    add_one = BLEU(lowercase=lowercase, tokenize="none", max_ngram_order=max_n,
                   smooth_method="add-k", smooth_value=1)
    if smoothing == "add_one":
        result = add_one.corpus_score(hyp_lines, [ref_lines])
    else:
        result = BLEU(lowercase=lowercase, tokenize="none", max_ngram_order=max_n,
                      smooth_method="none").corpus_score(hyp_lines, [ref_lines])
        if smoothing == "auto" and 0 in result.counts[1:]:
            result = add_one.corpus_score(hyp_lines, [ref_lines])
    return BleuResult(score=float(result.score), precisions=list(result.precisions),
                      brevity_penalty=float(result.bp), hyp_length=int(result.sys_len),
                      ref_length=int(result.ref_len))


# ---------------------------------------------------------------------------
# TER
# ---------------------------------------------------------------------------

@dataclass
class TerBreakdown:
    """
    Edits turning a hypothesis into its reference.

    insertions are reference words missing from the hypothesis, deletions
    are surplus hypothesis words.
    """
    insertions: int = 0
    deletions: int = 0
    substitutions: int = 0
    shifts: int = 0
    ref_length: int = 0

    @property
    def edits(self) -> int:
        return self.insertions + self.deletions + self.substitutions + self.shifts

    @property
    def score(self) -> float:
        if self.ref_length == 0:
            raise ValueError("TER is undefined for an empty reference")
        return self.edits / self.ref_length

    def count(self, operation: str) -> int:
        """Count for one of In / De / Su / Sh"""
        names = {"In": self.insertions, "De": self.deletions,
                 "Su": self.substitutions, "Sh": self.shifts}
        if operation not in names:
            raise ValueError(f"unknown edit operation {operation!r}; expected one of {list(names)}")
        return names[operation]

    def __add__(self, other: "TerBreakdown") -> "TerBreakdown":
        return TerBreakdown(self.insertions + other.insertions, self.deletions + other.deletions,
                            self.substitutions + other.substitutions, self.shifts + other.shifts,
                            self.ref_length + other.ref_length)


@dataclass(frozen=True)
class _Alignment:
    cost: int
    insertions: int
    deletions: int
    substitutions: int
    hyp_matched: Tuple[bool, ...]
    ref_matched: Tuple[bool, ...]
    ref_to_hyp: Tuple[int, ...]  # hyp position each ref word lines up with


@lru_cache(maxsize=65536)
def _align(hyp: Tuple[str, ...], ref: Tuple[str, ...]) -> _Alignment:
    """Levenshtein distance with a backtrace; diagonal moves preferred on ties"""
    rows, cols = len(hyp) + 1, len(ref) + 1
    dist = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        dist[i][0] = i
    for j in range(cols):
        dist[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            diagonal = dist[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1])
            dist[i][j] = min(diagonal, dist[i - 1][j] + 1, dist[i][j - 1] + 1)

    insertions = deletions = substitutions = 0
    hyp_matched = [False] * len(hyp)
    ref_matched = [False] * len(ref)
    ref_to_hyp = [0] * len(ref)
    i, j = len(hyp), len(ref)
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]):
            if hyp[i - 1] == ref[j - 1]:
                hyp_matched[i - 1] = ref_matched[j - 1] = True
            else:
                substitutions += 1
            ref_to_hyp[j - 1] = i - 1
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            deletions += 1
            i -= 1
        else:
            insertions += 1
            ref_to_hyp[j - 1] = i
            j -= 1
    return _Alignment(dist[-1][-1], insertions, deletions, substitutions,
                      tuple(hyp_matched), tuple(ref_matched), tuple(ref_to_hyp))


def _occurrences(ref: Tuple[str, ...], span: Tuple[str, ...]) -> List[int]:
    width = len(span)
    return [j for j in range(len(ref) - width + 1) if ref[j:j + width] == span]


def _best_shift(hyp: Tuple[str, ...], ref: Tuple[str, ...], alignment: _Alignment,
                max_shift_size: int, max_shift_distance: int):
    """
    Cheapest single block move, or None.

    Candidates: spans of up to ``max_shift_size`` hyp words that are not
    all matched already and appear in the reference at a place whose words
    are not all matched; the span moves next to the hyp word aligned with
    that reference position.
    """
    best = None
    for start in range(len(hyp)):
        for size in range(1, min(max_shift_size, len(hyp) - start) + 1):
            if all(alignment.hyp_matched[start:start + size]):
                continue
            span = hyp[start:start + size]
            rest = hyp[:start] + hyp[start + size:]
            for ref_start in _occurrences(ref, span):
                if all(alignment.ref_matched[ref_start:ref_start + size]):
                    continue
                anchor = alignment.ref_to_hyp[ref_start]
                for target in {anchor, anchor + 1}:
                    moved_to = target - size if target > start else target
                    if moved_to == start or not 0 <= moved_to <= len(rest):
                        continue
                    if abs(moved_to - start) > max_shift_distance:
                        continue
                    shifted = rest[:moved_to] + span + rest[moved_to:]
                    if shifted == hyp:
                        continue
                    cost = _align(shifted, ref).cost
                    key = (cost, start, -size, moved_to)
                    if best is None or key < best[0]:
                        best = (key, shifted)
    return best


def _ter_counts(hyp: Tuple[str, ...], ref: Tuple[str, ...],
                max_shift_size: int, max_shift_distance: int) -> TerBreakdown:
    current = hyp
    shifts = 0
    alignment = _align(current, ref)
    while True:
        candidate = _best_shift(current, ref, alignment, max_shift_size, max_shift_distance)
        if candidate is None:
            break
        (cost, *_), shifted = candidate
        if cost + 1 >= alignment.cost:
            break
        current = shifted
        shifts += 1
        alignment = _align(current, ref)
    return TerBreakdown(alignment.insertions, alignment.deletions, alignment.substitutions,
                        shifts, len(ref))


def ter(hyp: Tokens, ref: Tokens, lowercase: bool = False,
        max_shift_size: int = config.TER_MAX_SHIFT_SIZE,
        max_shift_distance: int = config.TER_MAX_SHIFT_DISTANCE) -> TerBreakdown:
    """
    Translation edit rate of one hypothesis.

    Shifts are taken greedily, the one lowering the edit distance most
    first, while a shift plus the remaining edits is cheaper than the
    edits without it. Insert / delete / substitute counts come from the
    final Levenshtein alignment, so the four counts sum to the score
    numerator. Token-level and case-sensitive unless ``lowercase``.
    """
    hyp_tokens, ref_tokens = _tokens(hyp, lowercase), _tokens(ref, lowercase)
    if not ref_tokens:
        raise ValueError("TER is undefined for an empty reference")
    return _ter_counts(hyp_tokens, ref_tokens, max_shift_size, max_shift_distance)


def ter_corpus(hyps: Sequence[Tokens], refs: Sequence[Tokens], lowercase: bool = False) -> TerBreakdown:
    """Summed edits over summed reference length"""
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses for {len(refs)} references")
    total = TerBreakdown()
    for hyp, ref in zip(hyps, refs):
        total = total + _ter_counts(_tokens(hyp, lowercase), _tokens(ref, lowercase),
                                    config.TER_MAX_SHIFT_SIZE, config.TER_MAX_SHIFT_DISTANCE)
    if total.ref_length == 0:
        raise ValueError("TER is undefined for an empty reference corpus")
    return total


def levenshtein_ter(hyp: Tokens, ref: Tokens) -> float:
    """Edit rate without shifts"""
    ref_tokens = _tokens(ref)
    if not ref_tokens:
        raise ValueError("TER is undefined for an empty reference")
    return _align(_tokens(hyp), ref_tokens).cost / len(ref_tokens)
