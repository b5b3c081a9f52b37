"""Piece vocabulary and decomposition tests."""

import pytest

from iggy_export.subwords import (
    CLS,
    MASK,
    PAD,
    UNK,
    PieceVocab,
    build_vocab,
    encode_words,
    split_word,
)


@pytest.fixture
def vocab():
    return build_vocab({"cat": 5, "mat": 4, "the": 9, "on": 7, "rare": 1}, min_count=3)


def test_specials_lead(vocab):
    assert vocab.pieces[:4] == (PAD, CLS, MASK, UNK)


def test_known_word_is_single_piece(vocab):
    assert split_word(vocab, "cat") == ["cat"]


def test_rare_word_decomposes(vocab):
    pieces = split_word(vocab, "rare")
    assert len(pieces) > 1
    assert pieces[0] == "r"
    assert all(p.startswith("##") for p in pieces[1:])
    assert "".join(p.lstrip("#") for p in pieces) == "rare"


def test_greedy_longest_match(vocab):
    # "catmat" starts with the known piece "cat", then chars
    pieces = split_word(vocab, "catmat")
    assert pieces[0] == "cat"


def test_unknown_character_becomes_unk(vocab):
    pieces = split_word(vocab, "catß")  # sharp s never seen
    assert pieces[-1] == UNK


def test_encode_counts_align(vocab):
    pieces, ids, counts = encode_words(vocab, ["the", "cat", "rare"])
    assert len(counts) == 3
    assert sum(counts) == len(pieces) == len(ids)
    assert counts[0] == counts[1] == 1
    assert counts[2] > 1


def test_vocab_rejects_missing_specials():
    with pytest.raises(ValueError):
        PieceVocab(pieces=("a", "b", "c", "d"))
