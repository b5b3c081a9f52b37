"""Greedy longest-match subword pieces over a fixed vocabulary.

Known words map to a single piece; anything else decomposes into an initial
piece plus ``##``-continuation pieces, with single characters guaranteeing
every word decomposes. Decomposition happens word by word, so the mapping
from score positions back to words is exact by construction (character
offsets never drift).
"""

from __future__ import annotations

from dataclasses import dataclass

PAD, CLS, MASK, UNK = "[pad]", "[cls]", "[mask]", "[unk]"
SPECIALS = (PAD, CLS, MASK, UNK)


@dataclass(frozen=True)
class PieceVocab:
    pieces: tuple[str, ...]

    def __post_init__(self):
        if tuple(self.pieces[:4]) != SPECIALS:
            raise ValueError("piece vocabulary must start with the special tokens")

    def __len__(self) -> int:
        return len(self.pieces)

    @property
    def index(self) -> dict[str, int]:
        cached = self.__dict__.get("_index")
        if cached is None:
            cached = {p: i for i, p in enumerate(self.pieces)}
            object.__setattr__(self, "_index", cached)
        return cached

    def id_of(self, piece: str) -> int:
        return self.index.get(piece, self.index[UNK])


def build_vocab(words_with_counts: dict[str, int], min_count: int = 3) -> PieceVocab:
    """Frequent words as whole pieces plus character pieces as the fallback."""
    chars = set()
    for word in words_with_counts:
        chars.update(word)
    pieces = list(SPECIALS)
    pieces += sorted(w for w, c in words_with_counts.items() if c >= min_count)
    pieces += sorted(chars)
    pieces += sorted("##" + c for c in chars)
    return PieceVocab(pieces=tuple(dict.fromkeys(pieces)))


def split_word(vocab: PieceVocab, word: str) -> list[str]:
    """Greedy longest-match decomposition; unknown characters become [unk]."""
    index = vocab.index
    if word in index:
        return [word]
    out: list[str] = []
    pos = 0
    while pos < len(word):
        end = len(word)
        piece = None
        while end > pos:
            candidate = word[pos:end] if pos == 0 else "##" + word[pos:end]
            if candidate in index:
                piece = candidate
                break
            end -= 1
        if piece is None:
            piece = UNK
            end = pos + 1
        out.append(piece)
        pos = end
    return out


def encode_words(vocab: PieceVocab, words: list[str]):
    """Pieces and ids for a word sequence plus per-word piece counts."""
    pieces: list[str] = []
    counts: list[int] = []
    for word in words:
        split = split_word(vocab, word)
        pieces.extend(split)
        counts.append(len(split))
    ids = [vocab.id_of(p) for p in pieces]
    return pieces, ids, counts
