"""
Joint Byte-Pair Encoding
One merge table learned over the pooled src, mt and pe text, so all three
sides share a single subword vocabulary
"""

import json
import logging
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import regex

import config

logger = logging.getLogger(__name__)

FORMAT_VERSION = "apebpe-1"

# Letters, digits and single punctuation marks split apart inside a
# whitespace word; only the last piece of a word carries the end-of-word marker
_PIECE_PATTERN = regex.compile(r"\p{L}+|\p{N}+|[^\s\p{L}\p{N}]")

Piece = Tuple[str, ...]


def split_pieces(sentence: str) -> List[Piece]:
    """Whitespace + punctuation pre-tokenization into character tuples"""
    pieces: List[Piece] = []
    for word in sentence.split():
        parts = _PIECE_PATTERN.findall(word)
        for position, part in enumerate(parts):
            symbols = tuple(part)
            if position == len(parts) - 1:
                symbols = symbols + (config.END_OF_WORD,)
            pieces.append(symbols)
    return pieces


def _merge_pair(symbols: Sequence[str], pair: Tuple[str, str]) -> Tuple[str, ...]:
    merged = []
    i = 0
    while i < len(symbols):
        if i < len(symbols) - 1 and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            merged.append(pair[0] + pair[1])
            i += 2
        else:
            merged.append(symbols[i])
            i += 1
    return tuple(merged)


class MergeTable:
    """
    Ordered merges plus the symbol vocabulary they induce.

    Ids: special tokens first (fixed), then the base alphabet in sorted
    order, then each merged symbol in the order it was learned.
    """

    def __init__(self, merges: Sequence[Tuple[str, str]], alphabet: Sequence[str],
                 specials: Sequence[str] = tuple(config.SPECIAL_TOKENS)):
        self.merges: List[Tuple[str, str]] = [tuple(pair) for pair in merges]
        self.alphabet: List[str] = sorted(set(alphabet))
        self.specials: List[str] = list(specials)

        self.symbols: List[str] = list(self.specials)
        self._ids: Dict[str, int] = {symbol: i for i, symbol in enumerate(self.symbols)}
        for symbol in self.alphabet + [a + b for a, b in self.merges]:
            if symbol in self._ids:
                raise ValueError(f"symbol {symbol!r} occurs twice in the merge table")
            self._ids[symbol] = len(self.symbols)
            self.symbols.append(symbol)
        self._ranks: Dict[Tuple[str, str], int] = {pair: rank for rank, pair in enumerate(self.merges)}
        self._cache: Dict[Piece, Tuple[str, ...]] = {}

    @property
    def vocab_size(self) -> int:
        return len(self.symbols)

    def __eq__(self, other) -> bool:
        return (isinstance(other, MergeTable) and self.merges == other.merges
                and self.alphabet == other.alphabet and self.specials == other.specials)

    def segment(self, piece: Piece) -> Tuple[str, ...]:
        """Apply merges to one piece, lowest-rank pair first"""
        cached = self._cache.get(piece)
        if cached is not None:
            return cached
        symbols = tuple(piece)
        while len(symbols) > 1:
            ranked = [self._ranks[pair] for pair in zip(symbols, symbols[1:]) if pair in self._ranks]
            if not ranked:
                break
            symbols = _merge_pair(symbols, self.merges[min(ranked)])
        self._cache[piece] = symbols
        return symbols

    def tokenize(self, sentence: str) -> List[str]:
        tokens: List[str] = []
        for piece in split_pieces(sentence):
            tokens.extend(self.segment(piece))
        return tokens

    def encode(self, sentence: str) -> List[int]:
        """Subword ids; unseen symbols map to the unknown id"""
        unk = self._ids[config.UNK_TOKEN]
        return [self._ids.get(token, unk) for token in self.tokenize(sentence)]

    def decode(self, ids: Iterable[int]) -> str:
        """
        Join subwords back into text. End-of-word markers become spaces;
        <s>, </s> and <pad> are dropped; unknown symbols show as <unk>.
        """
        skipped = {config.BOS_TOKEN, config.EOS_TOKEN, config.PAD_TOKEN}
        parts = []
        for token_id in ids:
            token_id = int(token_id)
            if not 0 <= token_id < len(self.symbols):
                raise ValueError(f"token id {token_id} outside vocabulary of size {len(self.symbols)}")
            symbol = self.symbols[token_id]
            if symbol in skipped:
                continue
            parts.append(symbol)
        text = "".join(parts).replace(config.END_OF_WORD, " ")
        return text.strip()

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------

    def to_text(self) -> str:
        header = {
            "alphabet": self.alphabet,
            "specials": {symbol: i for i, symbol in enumerate(self.specials)},
        }
        lines = [f"#{FORMAT_VERSION} {json.dumps(header, ensure_ascii=False, sort_keys=True)}"]
        lines.extend(f"{left} {right}" for left, right in self.merges)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MergeTable":
        lines = text.split("\n")
        prefix = f"#{FORMAT_VERSION} "
        if not lines or not lines[0].startswith(prefix):
            raise ValueError(f"not a {FORMAT_VERSION} merge table (bad header)")
        header = json.loads(lines[0][len(prefix):])
        specials = sorted(header["specials"], key=header["specials"].get)
        if specials != list(config.SPECIAL_TOKENS):
            raise ValueError(f"merge table special tokens {specials} differ from {config.SPECIAL_TOKENS}")
        merges = []
        for number, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) != 2:
                raise ValueError(f"line {number}: expected 'left right', got {line!r}")
            merges.append((parts[0], parts[1]))
        return cls(merges, header["alphabet"], specials)

    def save(self, path: Union[str, Path]):
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "MergeTable":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"merge table not found: {path}")
        return cls.from_text(path.read_text(encoding="utf-8"))


def _best_pair(pair_counts: Counter, known: Set[str]) -> Optional[Tuple[str, str]]:
    """Most frequent pair (ties by the pair itself) whose merge is not a symbol yet"""
    candidates = [(-count, pair) for pair, count in pair_counts.items()
                  if pair[0] + pair[1] not in known]
    return min(candidates)[1] if candidates else None


def learn_bpe(triplets, num_merges: int) -> MergeTable:
    """
    Learn merges greedily over the pooled text of every side.

    Args:
        triplets: a TripletCorpus (src, mt and pe are pooled) or any
            iterable of sentences
        num_merges: merge rounds; stops early when no pair yields a new
            symbol, so the vocabulary grows by exactly one per merge

    Returns:
        MergeTable
    """
    if num_merges < 0:
        raise ValueError(f"num_merges must be >= 0, got {num_merges}")
    sentences = triplets.pooled() if hasattr(triplets, "pooled") else triplets

    frequencies: Counter = Counter()
    for sentence in sentences:
        frequencies.update(split_pieces(sentence))
    if not frequencies:
        raise ValueError("cannot learn BPE from an empty corpus")

    alphabet = {symbol for piece in frequencies for symbol in piece}
    merges: List[Tuple[str, str]] = []
    known = set(config.SPECIAL_TOKENS) | alphabet
    vocab = dict(frequencies)
    for _ in range(num_merges):
        pair_counts: Counter = Counter()
        for piece, count in vocab.items():
            for pair in zip(piece, piece[1:]):
                pair_counts[pair] += count
        best = _best_pair(pair_counts, known)
        if best is None:
            logger.info("BPE stopped after %d merges: no new pairs left", len(merges))
            break
        merges.append(best)
        known.add(best[0] + best[1])
        merged_vocab: Dict[Piece, int] = {}
        for piece, count in vocab.items():
            key = _merge_pair(piece, best) if best[0] in piece else piece
            merged_vocab[key] = merged_vocab.get(key, 0) + count
        vocab = merged_vocab

    table = MergeTable(merges, sorted(alphabet))
    logger.info("Learned %d merges; vocabulary size %d", len(merges), table.vocab_size)
    return table


def encode(table: MergeTable, sentence: str) -> List[int]:
    return table.encode(sentence)


def decode(table: MergeTable, ids: Iterable[int]) -> str:
    return table.decode(ids)


def words_from_ids(ids: Iterable[int], table: Optional[MergeTable] = None) -> List[str]:
    """Whitespace words of the decoded text; bare ids when there is no table"""
    if table is None:
        return [str(int(token)) for token in ids]
    return table.decode(ids).split()
