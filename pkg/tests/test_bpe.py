"""Joint BPE: merge learning, segmentation, ids and the merge-table file"""

from collections import Counter

import pytest

import config
from src.tokenizer.bpe import MergeTable, _best_pair, learn_bpe, split_pieces, words_from_ids

SENTENCES = [
    "the lazy dog, again!",
    "die faule katze schläft 42 mal",
    "it's a test of the joint table",
]


@pytest.fixture
def table():
    return learn_bpe(SENTENCES, 40)


class TestPreTokenization:
    def test_punctuation_split_inside_words(self):
        assert split_pieces("it's") == [("i", "t"), ("'",), ("s", config.END_OF_WORD)]

    def test_letters_and_digits_separate(self):
        assert split_pieces("ab12") == [("a", "b"), ("1", "2", config.END_OF_WORD)]

    def test_whitespace_runs_ignored(self):
        assert split_pieces("  a \t b ") == split_pieces("a b")


class TestLearning:
    def test_first_merge_is_most_frequent_pair(self):
        # (a, </w>) and (a, a) both occur 3 times; ties break lexicographically
        merge_table = learn_bpe(["aa aa aa", "bc"], 1)
        assert merge_table.merges == [("a", config.END_OF_WORD)]

    def test_stops_when_no_pair_left(self):
        merge_table = learn_bpe(["ab"], 50)
        assert len(merge_table.merges) == 2
        assert merge_table.tokenize("ab") == ["ab" + config.END_OF_WORD]

    def test_zero_merges_keeps_characters(self):
        merge_table = learn_bpe(["abc"], 0)
        assert merge_table.tokenize("abc") == ["a", "b", "c", config.END_OF_WORD]

    def test_deterministic(self):
        assert learn_bpe(SENTENCES, 30) == learn_bpe(SENTENCES, 30)

    def test_pools_every_side_of_a_corpus(self, toy_corpus):
        merge_table = learn_bpe(toy_corpus, 0)
        for sentence in toy_corpus.pooled():
            assert config.UNK_ID not in merge_table.encode(sentence)

    def test_vocabulary_grows_by_one_per_merge(self, toy_corpus):
        for merge_table in (learn_bpe(SENTENCES, 500), learn_bpe(toy_corpus, 30)):
            expected = len(config.SPECIAL_TOKENS) + len(merge_table.alphabet) + len(merge_table.merges)
            assert merge_table.vocab_size == expected
            assert len(set(merge_table.symbols)) == expected

    def test_skips_pairs_that_rebuild_a_known_symbol(self):
        counts = Counter({("ab", "c"): 7, ("a", "bc"): 5, ("x", "y"): 1})
        assert _best_pair(counts, set()) == ("ab", "c")
        assert _best_pair(counts, {"abc"}) == ("x", "y")
        assert _best_pair(counts, {"abc", "xy"}) is None

    def test_repeated_symbol_rejected(self):
        with pytest.raises(ValueError, match="occurs twice"):
            MergeTable([("a", "b"), ("ab", "c"), ("b", "c"), ("a", "bc")], ["a", "b", "c"])

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            learn_bpe(SENTENCES, -1)
        with pytest.raises(ValueError, match="empty"):
            learn_bpe(["", "   "], 10)


class TestEncoding:
    def test_special_ids_come_first(self, table):
        assert table.symbols[:5] == config.SPECIAL_TOKENS
        assert table.symbols.index(config.PAD_TOKEN) == config.PAD_ID
        assert table.vocab_size == len(table.symbols)

    def test_round_trip(self, table):
        for sentence in SENTENCES + ["the  lazy   dog ,again"]:
            assert table.decode(table.encode(sentence)) == " ".join(sentence.split())

    def test_same_word_same_ids_on_every_side(self, toy_corpus):
        merge_table = learn_bpe(toy_corpus, 20)
        word = merge_table.encode("katze")
        assert merge_table.encode("die katze")[-len(word):] == word

    def test_unknown_characters_map_to_unk(self, table):
        ids = table.encode("dog ©")
        assert table.tokenize("©") == ["©", config.END_OF_WORD]
        assert config.UNK_ID in ids
        assert table.decode(ids).endswith(config.UNK_TOKEN)

    def test_decode_drops_framing_tokens(self, table):
        ids = [config.BOS_ID] + table.encode("the dog") + [config.EOS_ID, config.PAD_ID]
        assert table.decode(ids) == "the dog"

    def test_decode_rejects_out_of_range(self, table):
        with pytest.raises(ValueError, match="outside vocabulary"):
            table.decode([table.vocab_size])

    def test_words_from_ids(self, table):
        assert words_from_ids(table.encode("the dog"), table) == ["the", "dog"]
        assert words_from_ids([7, 8]) == ["7", "8"]


class TestMergeTableFile:
    def test_save_and_load(self, table, tmp_path):
        path = tmp_path / "bpe.txt"
        table.save(path)
        loaded = MergeTable.load(path)
        assert loaded == table
        assert loaded.symbols == table.symbols

    def test_bad_header(self):
        with pytest.raises(ValueError, match="bad header"):
            MergeTable.from_text("a b\n")

    def test_malformed_merge_line(self, table):
        text = table.to_text() + "abc\n"
        with pytest.raises(ValueError, match="expected 'left right'"):
            MergeTable.from_text(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            MergeTable.load(tmp_path / "none.txt")
