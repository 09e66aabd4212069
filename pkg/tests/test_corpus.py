"""Triplet corpus files: alignment, whitespace normalization, UTF-8 checks"""

import pytest

from helpers import write_corpus_files
from src.data.corpus import (
    TripletCorpus,
    corpus_paths,
    load_corpus,
    load_corpus_prefix,
    read_lines,
    save_corpus,
    write_lines,
)


class TestLoading:
    def test_line_i_is_triplet_i(self, toy_corpus, tmp_path):
        prefix = write_corpus_files(tmp_path, "toy", toy_corpus)
        loaded = load_corpus_prefix(prefix)
        assert len(loaded) == 4
        assert loaded[1] == ("a dog ran", "ein hund lief schnell", "ein hund lief")
        assert list(loaded) == list(toy_corpus)

    def test_whitespace_normalized(self, tmp_path):
        for side in ("src", "mt", "pe"):
            (tmp_path / f"ws.{side}").write_text("  a \t b  \n", encoding="utf-8")
        loaded = load_corpus(*corpus_paths(tmp_path / "ws"))
        assert loaded[0] == ("a b", "a b", "a b")

    def test_mismatched_counts_name_the_short_file(self, tmp_path):
        (tmp_path / "x.src").write_text("a\nb\n", encoding="utf-8")
        (tmp_path / "x.mt").write_text("a\n", encoding="utf-8")
        (tmp_path / "x.pe").write_text("a\nb\n", encoding="utf-8")
        with pytest.raises(ValueError, match=r"x\.mt is short"):
            load_corpus_prefix(tmp_path / "x")

    def test_invalid_utf8_reports_line(self, tmp_path):
        (tmp_path / "bad.src").write_bytes(b"ok\n\xff\xfe\n")
        with pytest.raises(ValueError, match=r"bad\.src:2: not valid UTF-8"):
            read_lines(tmp_path / "bad.src")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_corpus_prefix(tmp_path / "absent")

    def test_empty_lines_survive(self, tmp_path):
        path = write_lines(["a", "", "b"], tmp_path / "lines.txt")
        assert read_lines(path) == ["a", "", "b"]


class TestCorpus:
    def test_sides_must_align(self):
        with pytest.raises(ValueError, match="differ in length"):
            TripletCorpus(["a"], ["b", "c"], ["d"])

    def test_pooled_walks_every_side(self, toy_corpus):
        pooled = list(toy_corpus.pooled())
        assert len(pooled) == 12
        assert pooled[0] == toy_corpus.src[0] and pooled[-1] == toy_corpus.pe[-1]

    def test_encode_and_subset(self, toy_corpus, toy_table):
        examples = toy_corpus.encode(toy_table)
        subset = toy_corpus.subset([2, 0])
        assert subset.src == [toy_corpus.src[2], toy_corpus.src[0]]
        assert subset.encoded == [examples[2], examples[0]]

    def test_concat(self, toy_corpus):
        assert len(toy_corpus.concat(toy_corpus)) == 8

    def test_save_then_load(self, toy_corpus, tmp_path):
        paths = save_corpus(toy_corpus, tmp_path / "out" / "toy")
        assert all(path.exists() for path in paths)
        assert list(load_corpus_prefix(tmp_path / "out" / "toy")) == list(toy_corpus)

    def test_save_rejects_embedded_newline(self, tmp_path):
        corpus = TripletCorpus(["a\nb"], ["c"], ["d"])
        with pytest.raises(ValueError, match="newline"):
            save_corpus(corpus, tmp_path / "nl")
