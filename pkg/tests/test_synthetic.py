"""Synthetic triplet generator: determinism, corruption rates, domain shift"""

from dataclasses import replace

import pytest

from src.data.synthetic import SynthSpec, build_lexicon, expected_ter, gen_synthetic, split_sizes
from src.evaluation.metrics import ter_corpus
from src.tokenizer.bpe import learn_bpe

CLEAN = SynthSpec(substitute=0.0, drop=0.0, insert=0.0, swap=0.0, seed=5)


class TestGenerator:
    def test_deterministic(self):
        spec = SynthSpec(seed=3)
        first, second = gen_synthetic(spec, 30), gen_synthetic(spec, 30)
        assert list(first) == list(second)

    def test_streams_and_seeds_differ(self):
        spec = SynthSpec(seed=3)
        base = list(gen_synthetic(spec, 30))
        assert list(gen_synthetic(spec, 30, stream=1)) != base
        assert list(gen_synthetic(replace(spec, seed=4), 30)) != base

    def test_sentence_lengths(self):
        corpus = gen_synthetic(SynthSpec(min_words=2, max_words=4, seed=1), 200)
        for src, _, pe in corpus:
            assert 2 <= len(pe.split()) <= 4
            assert len(src.split()) == len(pe.split())

    def test_no_corruption_copies_pe(self):
        corpus = gen_synthetic(CLEAN, 50)
        assert corpus.mt == corpus.pe

    def test_src_is_word_by_word_translation(self):
        corpus = gen_synthetic(CLEAN, 100)
        translation = {}
        for src, _, pe in corpus:
            for s, p in zip(src.split(), pe.split()):
                assert translation.setdefault(p, s) == s

    def test_substitution_rate_matches_ter(self):
        spec = replace(CLEAN, substitute=0.2)
        corpus = gen_synthetic(spec, 2000)
        assert ter_corpus(corpus.mt, corpus.pe).score == pytest.approx(0.2, abs=0.03)
        assert expected_ter(spec) == pytest.approx(0.2)

    def test_substitutions_are_consistent(self):
        corpus = gen_synthetic(replace(CLEAN, substitute=0.5), 300)
        confusion = {}
        for _, mt, pe in corpus:
            for m, p in zip(mt.split(), pe.split()):
                if m != p:
                    assert confusion.setdefault(p, m) == m
        assert confusion

    def test_drop_only_shortens(self):
        corpus = gen_synthetic(replace(CLEAN, drop=0.3), 100)
        assert all(len(mt.split()) <= len(pe.split()) for _, mt, pe in corpus)
        assert sum(len(mt.split()) for mt in corpus.mt) < sum(len(pe.split()) for pe in corpus.pe)

    def test_domain_shift_separates_vocabularies(self):
        spec = replace(CLEAN, domain_shift=True)
        lexicon = build_lexicon(spec)
        first_half = set(lexicon.pe_words[:spec.lexicon_size // 2])

        def share(split):
            words = [w for line in gen_synthetic(spec, 300, split=split).pe for w in line.split()]
            return sum(w in first_half for w in words) / len(words)

        assert share("generic") > 0.75
        assert share("indomain") < 0.25

    def test_mt_shares_more_subwords_with_pe_than_src(self):
        corpus = gen_synthetic(SynthSpec(seed=3), 300)
        merge_table = learn_bpe(corpus, 1000)

        def overlap(side):
            shared = total = 0
            for triplet in corpus:
                pe = merge_table.tokenize(triplet[2])
                other = set(merge_table.tokenize(triplet[side]))
                shared += sum(token in other for token in pe)
                total += len(pe)
            return shared / total

        assert overlap(1) > 0.7
        assert overlap(0) < 0.05

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            gen_synthetic(CLEAN, 0)
        with pytest.raises(ValueError, match="unknown split"):
            gen_synthetic(CLEAN, 5, split="test")
        with pytest.raises(ValueError):
            gen_synthetic(replace(CLEAN, drop=1.5), 5)
        with pytest.raises(ValueError):
            gen_synthetic(replace(CLEAN, min_words=5, max_words=2), 5)


class TestLexicon:
    def test_words_unique_and_sides_disjoint(self):
        lexicon = build_lexicon(SynthSpec(lexicon_size=80, seed=2))
        assert len(set(lexicon.pe_words)) == 80
        assert len(set(lexicon.src_words)) == 80
        assert not set(lexicon.pe_words) & set(lexicon.src_words)

    def test_clusters_cover_lexicon(self):
        lexicon = build_lexicon(SynthSpec(lexicon_size=10, cluster_size=3))
        assert [len(c) for c in lexicon.clusters] == [3, 3, 3, 1]
        assert all(lexicon.cluster_of[w] == n for n, c in enumerate(lexicon.clusters) for w in c)


class TestHelpers:
    def test_expected_ter_combines_rates(self):
        spec = SynthSpec(substitute=0.1, drop=0.1, insert=0.1, swap=0.1)
        assert expected_ter(spec) == pytest.approx(0.1 + 0.9 * 0.2 + 0.9 * 0.1)

    def test_single_word_clusters_cannot_substitute(self):
        assert expected_ter(replace(CLEAN, substitute=0.5, cluster_size=1)) == 0.0

    def test_split_sizes(self):
        assert split_sizes(250, 0.2) == (200, 50)
        assert split_sizes(3, 0.01) == (2, 1)
