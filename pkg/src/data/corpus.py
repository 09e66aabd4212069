"""
Triplet Corpus
Three parallel text files (src, mt, pe), one sentence per line
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

from src.data.examples import TripletExample

logger = logging.getLogger(__name__)

SIDES = ("src", "mt", "pe")

PathLike = Union[str, Path]


def normalize_whitespace(line: str) -> str:
    return " ".join(line.split())


@dataclass
class TripletCorpus:
    """Parallel raw sentences plus (once encoded) their subword ids"""
    src: List[str]
    mt: List[str]
    pe: List[str]
    provenance: str = ""
    encoded: Optional[List[TripletExample]] = field(default=None, repr=False)

    def __post_init__(self):
        if not len(self.src) == len(self.mt) == len(self.pe):
            raise ValueError(f"triplet sides differ in length: src={len(self.src)}, "
                             f"mt={len(self.mt)}, pe={len(self.pe)}")

    def __len__(self) -> int:
        return len(self.pe)

    def __getitem__(self, index: int) -> Tuple[str, str, str]:
        return self.src[index], self.mt[index], self.pe[index]

    def __iter__(self) -> Iterator[Tuple[str, str, str]]:
        return iter(zip(self.src, self.mt, self.pe))

    def pooled(self) -> Iterator[str]:
        """Every sentence of every side (input to joint BPE)"""
        for side in (self.src, self.mt, self.pe):
            yield from side

    def encode(self, merge_table) -> List[TripletExample]:
        self.encoded = [TripletExample(merge_table.encode(s), merge_table.encode(m), merge_table.encode(p))
                        for s, m, p in self]
        return self.encoded

    def subset(self, indices: Sequence[int]) -> "TripletCorpus":
        encoded = [self.encoded[i] for i in indices] if self.encoded is not None else None
        return TripletCorpus([self.src[i] for i in indices], [self.mt[i] for i in indices],
                             [self.pe[i] for i in indices],
                             provenance=f"{self.provenance} [subset of {len(indices)}]",
                             encoded=encoded)

    def concat(self, other: "TripletCorpus") -> "TripletCorpus":
        return TripletCorpus(self.src + other.src, self.mt + other.mt, self.pe + other.pe,
                             provenance=f"{self.provenance} + {other.provenance}")


def _read_lines(path: Path) -> List[str]:
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    raw = path.read_bytes().split(b"\n")
    if raw and raw[-1] == b"":
        raw.pop()
    lines = []
    for number, chunk in enumerate(raw, start=1):
        try:
            text = chunk.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ValueError(f"{path}:{number}: not valid UTF-8 ({exc.reason})") from None
        lines.append(normalize_whitespace(text))
    return lines


def load_corpus(src_path: PathLike, mt_path: PathLike, pe_path: PathLike) -> TripletCorpus:
    """
    Load aligned src / mt / pe files; line i of each file is triplet i.

    Only whitespace is normalized (runs collapsed, ends stripped).
    """
    paths = [Path(src_path), Path(mt_path), Path(pe_path)]
    sides = [_read_lines(path) for path in paths]
    counts = [len(lines) for lines in sides]
    if len(set(counts)) > 1:
        short = min(range(3), key=lambda i: counts[i])
        details = ", ".join(f"{SIDES[i]}={counts[i]} ({paths[i]})" for i in range(3))
        raise ValueError(f"line counts differ; {paths[short]} is short: {details}")
    provenance = ",".join(str(p) for p in paths)
    logger.info("Loaded %d triplets from %s", counts[0], provenance)
    return TripletCorpus(*sides, provenance=provenance)


def corpus_paths(prefix: PathLike) -> Tuple[Path, Path, Path]:
    """``data/train`` -> data/train.src, data/train.mt, data/train.pe"""
    prefix = Path(prefix)
    return tuple(prefix.with_name(f"{prefix.name}.{side}") for side in SIDES)


def load_corpus_prefix(prefix: PathLike) -> TripletCorpus:
    return load_corpus(*corpus_paths(prefix))


def save_corpus(corpus: TripletCorpus, prefix: PathLike) -> Tuple[Path, Path, Path]:
    paths = corpus_paths(prefix)
    paths[0].parent.mkdir(parents=True, exist_ok=True)
    for path, lines in zip(paths, (corpus.src, corpus.mt, corpus.pe)):
        for number, line in enumerate(lines, start=1):
            if "\n" in line:
                raise ValueError(f"{path}:{number}: sentence contains a newline")
        path.write_bytes("".join(f"{line}\n" for line in lines).encode("utf-8"))
    logger.info("Saved %d triplets to %s.{src,mt,pe}", len(corpus), Path(prefix))
    return paths


def write_lines(lines: Sequence[str], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes("".join(f"{line}\n" for line in lines).encode("utf-8"))
    return path


def read_lines(path: PathLike) -> List[str]:
    return _read_lines(Path(path))
