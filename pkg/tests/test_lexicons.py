"""Word table, NBSVM, and connotation list tests."""

import math
import random

import numpy as np
import pytest

from iggy import lexicons
from iggy.errors import InputError
from iggy.lexicons import (
    ConnotationLists,
    connotation_flags,
    crudeness_prob,
    load_word_table,
    log_count_ratio,
    lookup_stats,
    train_nbsvm,
    word_benign_prob,
)


class TestWordTable:
    def test_load_simple(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("cat\t4.0\n")
        table = load_word_table(str(path), "aoa")
        assert table.entries == {"cat": 4.0}

    def test_duplicate_keeps_first(self, tmp_path, caplog):
        path = tmp_path / "t.tsv"
        path.write_text("cat\t4.0\ncat\t9.0\n")
        table = load_word_table(str(path), "aoa")
        assert table.entries["cat"] == 4.0
        assert any("duplicate" in r.message for r in caplog.records)

    def test_non_numeric_value(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("cat\tfour\n")
        with pytest.raises(InputError, match="1"):
            load_word_table(str(path), "aoa")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("")
        with pytest.raises(InputError):
            load_word_table(str(path), "aoa")

    def test_aoa_must_be_positive(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("cat\t-1.0\n")
        with pytest.raises(InputError, match="positive"):
            load_word_table(str(path), "aoa")

    def test_uppercase_word_lowered(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("CaT\t4.0\n")
        assert "cat" in load_word_table(str(path), "funniness").entries


class TestLookupStats:
    def _table(self, entries):
        return lexicons.WordValueTable(kind="aoa", entries=entries)

    def test_single_word(self):
        stats = lookup_stats(self._table({"cat": 4.0}), ["cat"])
        assert stats == {"mean": 4.0, "max": 4.0, "min": 4.0,
                         "variance": 0.0, "coverage": 1.0}

    def test_absent_word(self):
        stats = lookup_stats(self._table({"cat": 4.0}), ["rheology"])
        assert stats["coverage"] == 0.0
        assert stats["mean"] == 0.0

    def test_two_words(self):
        stats = lookup_stats(self._table({"cat": 4.0, "dog": 6.0}), ["cat", "dog"])
        assert stats["mean"] == pytest.approx(5.0)
        assert stats["variance"] == pytest.approx(1.0)
        assert stats["coverage"] == 1.0

    def test_permutation_invariant(self, rng):
        table = self._table({w: float(i) for i, w in enumerate("abcdefg")})
        words = list("gfeabbc")
        base = lookup_stats(table, words)
        for _ in range(5):
            rng.shuffle(words)
            assert lookup_stats(table, words) == base

    def test_ordering_invariant(self):
        table = self._table({"a": 1.0, "b": 5.0, "c": 2.5})
        stats = lookup_stats(table, ["a", "b", "c"])
        assert stats["min"] <= stats["mean"] <= stats["max"]
        assert stats["variance"] >= 0


class TestNbsvm:
    def test_log_count_ratio_hand_example(self):
        # presence counts p=(2,0), q=(0,2) over features (foo, bar)
        presence = np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=float)
        labels = np.array([1, 1, 0, 0])
        r = log_count_ratio(presence, labels)
        assert r[0] == pytest.approx(math.log(3.0), abs=1e-12)
        assert r[1] == pytest.approx(-math.log(3.0), abs=1e-12)

    def test_sign_separation_tiny(self):
        model = train_nbsvm([("foo", "crude"), ("bar", "benign")])
        idx_foo = model.vocabulary["foo"]
        idx_bar = model.vocabulary["bar"]
        assert model.r[idx_foo] > 0
        assert model.r[idx_bar] < 0
        assert crudeness_prob(model, "foo") > 0.5
        assert crudeness_prob(model, "bar") < 0.5

    def test_label_swap_negates_r(self):
        docs = [("foo baz", 1), ("bar baz", 0), ("foo qux", 1), ("bar", 0)]
        swapped = [(text, 1 - label) for text, label in docs]
        presence = None
        m1 = train_nbsvm(docs)
        m2 = train_nbsvm(swapped)
        assert np.allclose(m1.r, -m2.r)

    def test_single_class_rejected(self):
        with pytest.raises(InputError):
            train_nbsvm([("a", 1), ("b", 1)])

    def test_oov_gives_bias_probability(self):
        model = train_nbsvm([("foo", 1), ("bar", 0)])
        sigmoid_bias = 1.0 / (1.0 + math.exp(-model.bias))
        assert crudeness_prob(model, "zzz qqq") == pytest.approx(sigmoid_bias)
        assert crudeness_prob(model, "") == pytest.approx(sigmoid_bias)

    def test_probability_bounds_and_monotonicity(self, rng):
        docs = [(f"{w} filler", 1) for w in ["bad", "worse", "gross"]]
        docs += [(f"{w} filler", 0) for w in ["nice", "fine", "calm"]]
        model = train_nbsvm(docs * 5)
        for text in ["bad worse", "nice", "bad nice filler", "unseen words"]:
            assert 0.0 <= crudeness_prob(model, text) <= 1.0

    def test_benign_prob_clamped(self):
        model = train_nbsvm([("foo", 1), ("bar", 0)])
        # force an extreme score by inflating the weights
        model.w = model.w * 1e6
        model.bias = -1e6
        assert word_benign_prob(model, "bar") == 1.0
        model.bias = 1e6
        assert word_benign_prob(model, "foo") == lexicons.BENIGN_PROB_FLOOR

    def test_synthetic_fixture_heldout_accuracy(self):
        rng = random.Random(17)
        crude_words = ["poop", "butt", "fart", "snot", "gunk"]
        benign_words = ["report", "garden", "recipe", "ledger", "memo"]
        fillers = ["the", "about", "my", "today", "again"]
        docs = []
        for i in range(200):
            crude = i % 2 == 0
            pool = crude_words if crude else benign_words
            words = [rng.choice(pool) for _ in range(3)]
            words += [rng.choice(fillers) for _ in range(3)]
            rng.shuffle(words)
            docs.append((" ".join(words), 1 if crude else 0))
        train, held = docs[:150], docs[150:]
        model = train_nbsvm(train)
        correct = sum(1 for text, label in held
                      if (crudeness_prob(model, text) >= 0.5) == bool(label))
        assert correct / len(held) >= 0.9


class TestConnotations:
    def test_whitelist_hit(self):
        lists = ConnotationLists(whitelist=frozenset({"coitus"}), blacklist=frozenset())
        flags = connotation_flags(lists, ["coitus"])
        assert flags == {"has_white": True, "has_black": False}

    def test_both_flags(self):
        lists = ConnotationLists(whitelist=frozenset({"coitus"}),
                                 blacklist=frozenset({"abuse"}))
        flags = connotation_flags(lists, ["abuse", "coitus"])
        assert flags == {"has_white": True, "has_black": True}

    def test_empty_lists(self):
        lists = ConnotationLists(whitelist=frozenset(), blacklist=frozenset())
        assert connotation_flags(lists, ["anything"]) == {
            "has_white": False, "has_black": False}

    def test_overlap_rejected(self):
        with pytest.raises(InputError):
            ConnotationLists(whitelist=frozenset({"x"}), blacklist=frozenset({"x"}))

    def test_load_word_list(self, tmp_path):
        path = tmp_path / "wl.txt"
        path.write_text("Alpha\n\nbeta\n")
        assert lexicons.load_word_list(str(path)) == frozenset({"alpha", "beta"})


def test_nbsvm_roundtrip(tmp_path):
    model = train_nbsvm([("foo baz", 1), ("bar baz", 0), ("foo", 1), ("bar", 0)])
    path = tmp_path / "nbsvm.json"
    lexicons.save_nbsvm(model, str(path))
    loaded = lexicons.load_nbsvm(str(path))
    for text in ["foo", "bar", "baz foo bar", ""]:
        assert crudeness_prob(loaded, text) == pytest.approx(
            crudeness_prob(model, text), abs=1e-12)
