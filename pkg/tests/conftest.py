"""Shared fixtures: tiny model configurations, encoded toy corpora, merge tables"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.data.corpus import TripletCorpus
from src.data.examples import TripletExample
from src.model.transference import ModelConfig, init_params
from src.tokenizer.bpe import learn_bpe
from src.training.trainer import TrainConfig

TOY_SENTENCES = [
    ("the cat sat", "die katze sass", "die katze sass"),
    ("a dog ran", "ein hund lief schnell", "ein hund lief"),
    ("the dog sat", "der hund sass", "der hund sass"),
    ("a cat ran fast", "eine katze lief", "eine katze lief schnell"),
]


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def tiny_config():
    """1-1-1 layers, d_model 8: small enough for finite-difference checks"""
    return ModelConfig(n_src=1, n_mt=1, n_pe=1, d_model=8, num_heads=2, d_ff=16,
                       dropout=0.0, vocab_size=12, max_len=10)


@pytest.fixture
def tiny_model(tiny_config):
    return init_params(tiny_config, seed=7)


@pytest.fixture
def small_config():
    return ModelConfig(n_src=2, n_mt=2, n_pe=2, d_model=16, num_heads=4, d_ff=32,
                       dropout=0.0, vocab_size=100, max_len=20)


@pytest.fixture
def toy_examples():
    """Encoded triplets over the tiny vocabulary (ids 5..11)"""
    return [
        TripletExample([5, 6, 7], [8, 9], [8, 10]),
        TripletExample([6, 6], [9, 11, 8], [9, 11]),
        TripletExample([7, 5, 6, 8], [10, 10], [10, 5, 10]),
        TripletExample([11], [5, 7, 9], [5, 7]),
    ]


@pytest.fixture
def tiny_train_config():
    return TrainConfig(warmup_steps=4, token_budget=40, max_len=10, max_steps=3,
                       eval_interval=2, dev_decode_limit=4, label_smoothing=0.1,
                       show_progress=False)


@pytest.fixture
def toy_corpus():
    src, mt, pe = (list(side) for side in zip(*TOY_SENTENCES))
    return TripletCorpus(src, mt, pe, provenance="toy")


@pytest.fixture
def toy_table(toy_corpus):
    return learn_bpe(toy_corpus, 20)
