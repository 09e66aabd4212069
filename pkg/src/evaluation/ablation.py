"""
Ablation and Architecture Comparison
Trains one model per configuration under the same seed and budget and
tabulates dev BLEU / TER next to the parameter count
"""

import logging
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

import pandas as pd
from tqdm import tqdm

import config
from src.data.examples import TripletExample
from src.decoding.beam_search import beam_search
from src.evaluation.metrics import bleu_corpus, ter_corpus
from src.model.transference import ModelConfig, count_params, init_params
from src.tokenizer.bpe import words_from_ids
from src.training.trainer import TrainConfig, Trainer

logger = logging.getLogger(__name__)

ABLATION_COLUMNS = ["N_src-N_mt-N_pe", "BLEU", "TER", "params"]
ARCHITECTURE_COLUMNS = ["architecture", "BLEU", "TER", "params"]


def layer_label(triple: Tuple[int, int, int]) -> str:
    return "-".join(str(n) for n in triple)


def score_model(model, dev: Sequence[TripletExample], merge_table=None,
                beam_size: int = config.BEAM_SIZE) -> Tuple[float, float]:
    """Corpus BLEU and TER (0-100) of beam output on ``dev``"""
    hyps = [words_from_ids(beam_search(model, ex.src, ex.mt, beam_size=beam_size), merge_table)
            for ex in dev]
    refs = [words_from_ids(ex.pe, merge_table) for ex in dev]
    return bleu_corpus(hyps, refs).score, 100.0 * ter_corpus(hyps, refs).score


def _train_and_score(model_config: ModelConfig, corpus: Sequence[TripletExample],
                     dev: Sequence[TripletExample], train_config: TrainConfig,
                     merge_table, beam_size: int):
    model = init_params(model_config, seed=train_config.seed)
    Trainer(model, train_config, merge_table).train(corpus, ())
    bleu, ter = score_model(model, dev, merge_table, beam_size)
    return bleu, ter, count_params(model)


def run_ablation(base_config: ModelConfig, layer_triples: Sequence[Tuple[int, int, int]],
                 corpus: Sequence[TripletExample], dev: Sequence[TripletExample],
                 train_config: TrainConfig, merge_table=None,
                 beam_size: int = config.BEAM_SIZE) -> pd.DataFrame:
    """
    One row per (N_src, N_mt, N_pe) triple.

    Every triple is validated against the architecture before any training
    starts. No ordering of scores is implied; the table is the result.
    """
    if not dev:
        raise ValueError("ablation needs a non-empty dev set")
    configs = []
    for triple in layer_triples:
        if len(triple) != 3:
            raise ValueError(f"layer triple must have three entries, got {triple!r}")
        n_src, n_mt, n_pe = (int(n) for n in triple)
        configs.append(replace(base_config, n_src=n_src, n_mt=n_mt, n_pe=n_pe).validate())

    rows: List[dict] = []
    for model_config in tqdm(configs, desc="Ablation", unit="config",
                             disable=not train_config.show_progress):
        label = layer_label(model_config.layers)
        logger.info("Ablation: training %s (%s)", label, model_config.architecture)
        bleu, ter, params = _train_and_score(model_config, corpus, dev, train_config,
                                             merge_table, beam_size)
        rows.append({"N_src-N_mt-N_pe": label, "BLEU": bleu, "TER": ter, "params": params})
    return pd.DataFrame(rows, columns=ABLATION_COLUMNS)


def run_architecture_comparison(base_config: ModelConfig, architectures: Sequence[str],
                                corpus: Sequence[TripletExample], dev: Sequence[TripletExample],
                                train_config: TrainConfig, merge_table=None,
                                beam_size: int = config.BEAM_SIZE,
                                raw_mt: Optional[Tuple[float, float]] = None) -> pd.DataFrame:
    """
    Same table shape keyed by architecture, optionally topped with a
    "raw MT" row (BLEU, TER of mt against pe).
    """
    if not dev:
        raise ValueError("architecture comparison needs a non-empty dev set")
    configs = [replace(base_config, architecture=arch).validate() for arch in architectures]

    rows: List[dict] = []
    if raw_mt is not None:
        rows.append({"architecture": "raw MT", "BLEU": raw_mt[0], "TER": raw_mt[1], "params": 0})
    for model_config in tqdm(configs, desc="Architectures", unit="config",
                             disable=not train_config.show_progress):
        logger.info("Comparison: training %s", model_config.architecture)
        bleu, ter, params = _train_and_score(model_config, corpus, dev, train_config,
                                             merge_table, beam_size)
        rows.append({"architecture": model_config.architecture, "BLEU": bleu, "TER": ter,
                     "params": params})
    return pd.DataFrame(rows, columns=ARCHITECTURE_COLUMNS)


def raw_mt_scores(dev: Sequence[TripletExample], merge_table=None) -> Tuple[float, float]:
    hyps = [words_from_ids(ex.mt, merge_table) for ex in dev]
    refs = [words_from_ids(ex.pe, merge_table) for ex in dev]
    return bleu_corpus(hyps, refs).score, 100.0 * ter_corpus(hyps, refs).score
