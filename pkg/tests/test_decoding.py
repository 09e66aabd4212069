"""Greedy, beam and ensemble decoding plus whole-corpus decoding"""

from dataclasses import replace

import numpy as np
import pytest

import config
from src.data.corpus import TripletCorpus, read_lines
from src.decoding.beam_search import (
    BeamHypothesis,
    ModelEnsemble,
    beam_search,
    beam_search_hypotheses,
    greedy_decode,
)
from src.decoding.corpus_decoder import decode_corpus, score_corpus
from src.model.transference import init_params

RIGGED_VOCAB = 7


def distribution(**probs):
    """Log probabilities over the rigged vocabulary; unnamed tokens get -inf"""
    ids = {"eos": config.EOS_ID, "five": 5, "six": 6}
    log_probs = np.full(RIGGED_VOCAB, -np.inf)
    for name, p in probs.items():
        log_probs[ids[name]] = np.log(p)
    return log_probs


class RiggedModel:
    """
    Next-token table keyed by the prefix: greedy takes 5 then 5, while
    6 followed by </s> has the higher sequence probability.
    """

    TABLE = {
        (): distribution(five=0.5, six=0.4, eos=0.1),
        (5,): distribution(eos=0.3, five=0.35, six=0.35),
        (6,): distribution(eos=0.9, five=0.05, six=0.05),
    }
    LATER = distribution(eos=0.97, five=0.015, six=0.015)

    max_output_length = 100

    def start_decoding(self, src, mt):
        return None

    def step_log_probs(self, state, prefixes):
        return np.stack([self.TABLE.get(tuple(int(t) for t in row[1:]), self.LATER)
                         for row in prefixes])


class NeverEnds:
    """Prefers token 5 forever; </s> is never the arg-max"""

    def __init__(self, max_output_length=100):
        self.max_output_length = max_output_length

    def start_decoding(self, src, mt):
        return None

    def step_log_probs(self, state, prefixes):
        probs = np.full(RIGGED_VOCAB, 0.1 / (RIGGED_VOCAB - 1))
        probs[5] = 0.9
        return np.log(np.tile(probs, (len(prefixes), 1)))


def sequence_score(model, tokens, length_penalty):
    """Length-normalized score of ``tokens`` + </s> under ``model``"""
    hyp = BeamHypothesis()
    for token in [*tokens, config.EOS_ID]:
        prefix = np.asarray([[config.BOS_ID, *hyp.tokens]])
        hyp = hyp.extend(token, float(model.step_log_probs(None, prefix)[0, token]))
    return hyp.score(length_penalty)


def random_pair(rng, vocab=12):
    return (list(rng.integers(5, vocab, rng.integers(1, 6))),
            list(rng.integers(5, vocab, rng.integers(1, 6))))


class TestBeamHypothesis:
    def test_extend_and_finish(self):
        hyp = BeamHypothesis().extend(5, -0.5).extend(config.EOS_ID, -0.25)
        assert hyp.tokens == (5,)
        assert hyp.finished and hyp.length == 2
        assert hyp.log_prob == pytest.approx(-0.75)
        with pytest.raises(ValueError):
            hyp.extend(6, -1.0)

    def test_length_normalized_score(self):
        hyp = BeamHypothesis((5, 6, 7), -2.0, finished=True)
        assert hyp.score(0.6) == pytest.approx(-2.0 / 4 ** 0.6)
        assert hyp.score(0.0) == -2.0


class TestRiggedSearch:
    def test_greedy_misses_better_sequence(self):
        assert greedy_decode(RiggedModel(), [], [5]) == [5, 5]

    @pytest.mark.parametrize("beam_size, expected", [(1, [5, 5]), (2, [6]), (3, [6])])
    def test_wider_beam_finds_it(self, beam_size, expected):
        assert beam_search(RiggedModel(), [], [5], beam_size=beam_size, length_penalty=0.0) == expected

    def test_hypotheses_sorted_best_first(self):
        hyps = beam_search_hypotheses(RiggedModel(), [], [5], beam_size=2, length_penalty=0.0)
        assert [h.tokens for h in hyps] == [(6,), (5, 5)]
        assert hyps[0].log_prob == pytest.approx(np.log(0.36))
        assert all(h.finished for h in hyps)

    @pytest.mark.parametrize("length_penalty", [0.0, 0.6, 1.0])
    def test_best_score_never_drops_with_wider_beam(self, length_penalty):
        model = RiggedModel()
        greedy = sequence_score(model, greedy_decode(model, [], [5]), length_penalty)
        best = [beam_search_hypotheses(model, [], [5], beam_size=k, length_penalty=length_penalty)[0]
                .score(length_penalty) for k in (1, 2, 3)]
        assert best[0] == pytest.approx(greedy)
        assert all(wider >= narrower - 1e-12 for narrower, wider in zip(best, best[1:]))
        assert best[-1] > greedy

    def test_max_len_forces_end(self):
        assert beam_search(RiggedModel(), [], [5], beam_size=2, max_len=1, length_penalty=0.0) == [6]
        assert greedy_decode(RiggedModel(), [], [5], max_len=1) == [5]

    def test_default_limit_is_mt_length_plus_offset(self):
        mt = [5, 6, 7]
        assert len(greedy_decode(NeverEnds(), [], mt)) == len(mt) + config.MAX_LEN_OFFSET
        assert len(beam_search(NeverEnds(), [], mt, beam_size=1)) == len(mt) + config.MAX_LEN_OFFSET

    def test_limit_clamped_to_model(self):
        assert len(greedy_decode(NeverEnds(max_output_length=10), [], [5] * 30)) == 10
        assert len(beam_search(NeverEnds(), [], [5], beam_size=2, max_len=4)) == 4

    def test_invalid_beam(self):
        with pytest.raises(ValueError):
            beam_search(RiggedModel(), [], [5], beam_size=0)


class TestModelSearch:
    def test_beam_of_one_is_greedy(self, tiny_model):
        rng = np.random.default_rng(0)
        for _ in range(100):
            src, mt = random_pair(rng)
            assert beam_search(tiny_model, src, mt, beam_size=1) == greedy_decode(tiny_model, src, mt)

    def test_output_within_limit(self, tiny_model):
        rng = np.random.default_rng(1)
        for _ in range(10):
            src, mt = random_pair(rng)
            tokens = beam_search(tiny_model, src, mt, beam_size=3)
            assert len(tokens) <= tiny_model.max_output_length
            assert config.EOS_ID not in tokens


class TestEnsemble:
    def test_duplicate_members_change_nothing(self, tiny_model):
        ensemble = ModelEnsemble([tiny_model, tiny_model])
        state = ensemble.start_decoding([5, 6], [7, 8])
        prefixes = np.array([[0, 9], [0, 10]])
        single = tiny_model.step_log_probs(tiny_model.start_decoding([5, 6], [7, 8]), prefixes)
        np.testing.assert_array_equal(ensemble.step_log_probs(state, prefixes), single)

    def test_duplicate_ensemble_search_matches_single(self, tiny_model):
        rng = np.random.default_rng(2)
        for _ in range(10):
            src, mt = random_pair(rng)
            assert beam_search([tiny_model, tiny_model], src, mt, beam_size=2) == \
                beam_search(tiny_model, src, mt, beam_size=2)

    @pytest.mark.parametrize("mode", ["prob", "log"])
    def test_member_order_irrelevant(self, tiny_config, mode):
        models = [init_params(tiny_config, seed=s) for s in (1, 2, 3)]
        prefixes = np.array([[0, 5, 6]])
        outputs = []
        for members in (models, models[::-1], [models[1], models[2], models[0]]):
            ensemble = ModelEnsemble(members, mode)
            outputs.append(ensemble.step_log_probs(ensemble.start_decoding([5], [6, 7]), prefixes))
        np.testing.assert_array_equal(outputs[0], outputs[1])
        np.testing.assert_array_equal(outputs[0], outputs[2])

    def test_prob_mode_averages_probabilities(self, tiny_config):
        models = [init_params(tiny_config, seed=s) for s in (1, 2)]
        prefixes = np.array([[0, 5]])
        members = [m.step_log_probs(m.start_decoding([5], [6]), prefixes) for m in models]
        ensemble = ModelEnsemble(models, "prob")
        combined = ensemble.step_log_probs(ensemble.start_decoding([5], [6]), prefixes)
        np.testing.assert_allclose(np.exp(combined), (np.exp(members[0]) + np.exp(members[1])) / 2)

    def test_log_mode_renormalizes(self, tiny_config):
        models = [init_params(tiny_config, seed=s) for s in (1, 2)]
        ensemble = ModelEnsemble(models, "log")
        combined = ensemble.step_log_probs(ensemble.start_decoding([5], [6]), np.array([[0]]))
        assert np.exp(combined).sum() == pytest.approx(1.0)

    def test_nested_groups_count_once(self, tiny_config):
        a, b, c = (init_params(tiny_config, seed=s) for s in (1, 2, 3))
        ensemble = ModelEnsemble([[a, b], c])
        assert len(ensemble.members) == 2
        assert isinstance(ensemble.members[0], ModelEnsemble)

    def test_rejects_bad_members(self, tiny_model, tiny_config):
        with pytest.raises(ValueError):
            ModelEnsemble([])
        with pytest.raises(ValueError, match="unknown ensemble mode"):
            ModelEnsemble([tiny_model], "max")
        with pytest.raises(ValueError, match="disagree on vocabulary"):
            ModelEnsemble([tiny_model, init_params(replace(tiny_config, vocab_size=13))])


class TestCorpusDecoding:
    @pytest.fixture
    def corpus_model(self, tiny_config, toy_table):
        return init_params(replace(tiny_config, vocab_size=toy_table.vocab_size, max_len=40), seed=2)

    def test_one_line_per_triplet(self, corpus_model, toy_corpus, toy_table, tmp_path):
        result = decode_corpus(corpus_model, toy_corpus, toy_table, beam_size=2, max_len=5,
                               out_path=tmp_path / "hyp.txt", show_progress=False)
        assert len(result.hypotheses) == len(toy_corpus)
        assert read_lines(result.output_path) == [" ".join(h.split()) for h in result.hypotheses]

    def test_raw_mt_baseline(self, corpus_model, toy_corpus, toy_table):
        result = decode_corpus(corpus_model, toy_corpus, toy_table, beam_size=1, max_len=3,
                               show_progress=False)
        expected = score_corpus(list(toy_corpus.mt), list(toy_corpus.pe))
        assert result.raw_mt.bleu == pytest.approx(expected.bleu)
        assert result.raw_mt.ter == pytest.approx(expected.ter)
        assert 0 <= result.system.ter

    def test_workers_keep_order(self, corpus_model, toy_corpus, toy_table):
        serial = decode_corpus(corpus_model, toy_corpus, toy_table, beam_size=2, max_len=4,
                               show_progress=False)
        threaded = decode_corpus(corpus_model, toy_corpus, toy_table, beam_size=2, max_len=4,
                                 workers=3, show_progress=False)
        assert threaded.hypotheses == serial.hypotheses

    def test_empty_corpus(self, corpus_model, toy_table):
        with pytest.raises(ValueError, match="empty"):
            decode_corpus(corpus_model, TripletCorpus([], [], []), toy_table)
