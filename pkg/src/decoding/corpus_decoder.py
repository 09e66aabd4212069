"""
Corpus Decoding
Decodes every triplet of a corpus, writes the hypothesis file and scores it
against pe next to the raw-MT baseline
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

from tqdm import tqdm

import config
from src.data.corpus import TripletCorpus, write_lines
from src.decoding.beam_search import as_decoder, beam_search
from src.evaluation.metrics import TerBreakdown, bleu_corpus, ter_corpus

logger = logging.getLogger(__name__)


@dataclass
class CorpusScores:
    bleu: float
    ter: float
    breakdown: TerBreakdown


@dataclass
class DecodeResult:
    hypotheses: List[str]
    system: CorpusScores
    raw_mt: CorpusScores
    output_path: Optional[Path] = None


def score_corpus(hypotheses: List[str], references: List[str], lowercase: bool = False) -> CorpusScores:
    """BLEU and TER (both 0-100) of detokenized hypotheses"""
    breakdown = ter_corpus(hypotheses, references, lowercase=lowercase)
    return CorpusScores(bleu=bleu_corpus(hypotheses, references, lowercase=lowercase).score,
                        ter=100.0 * breakdown.score, breakdown=breakdown)


def decode_corpus(models, corpus: TripletCorpus, merge_table,
                  beam_size: int = config.BEAM_SIZE,
                  length_penalty: float = config.LENGTH_PENALTY,
                  max_len: Optional[int] = None,
                  out_path: Optional[Union[str, Path]] = None,
                  workers: int = config.DECODE_WORKERS,
                  ensemble_mode: str = "prob",
                  show_progress: bool = True) -> DecodeResult:
    """
    Post-edit a whole corpus.

    Args:
        models: model, model list, or nested groups (see ``beam_search``)
        corpus: triplets; pe serves as the reference
        merge_table: joint BPE used to encode inputs and detokenize output
        beam_size / length_penalty / max_len: search settings
        out_path: hypothesis file, one line per triplet in corpus order
        workers: decoding threads; output order is restored by index

    Returns:
        DecodeResult with system and raw-MT scores
    """
    if len(corpus) == 0:
        raise ValueError("cannot decode an empty corpus")
    decoder = as_decoder(models, ensemble_mode)
    examples = corpus.encoded if corpus.encoded is not None else corpus.encode(merge_table)

    def decode_one(index: int) -> str:
        example = examples[index]
        ids = beam_search(decoder, example.src, example.mt, beam_size=beam_size,
                          max_len=max_len, length_penalty=length_penalty)
        return merge_table.decode(ids)

    indices = range(len(examples))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hypotheses = list(tqdm(pool.map(decode_one, indices), total=len(examples),
                                   desc="Decoding", disable=not show_progress))
    else:
        hypotheses = [decode_one(i) for i in tqdm(indices, desc="Decoding", disable=not show_progress)]

    written = None
    if out_path is not None:
        try:
            written = write_lines(hypotheses, out_path)
        except OSError as exc:
            raise OSError(f"cannot write hypotheses to {out_path}: {exc.strerror}") from exc
        logger.info("Wrote %d hypotheses to %s", len(hypotheses), written)

    references = list(corpus.pe)
    return DecodeResult(hypotheses=hypotheses,
                        system=score_corpus(hypotheses, references),
                        raw_mt=score_corpus(list(corpus.mt), references),
                        output_path=written)
