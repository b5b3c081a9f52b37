"""Word tokenization matching the consumer's documented contract.

The downstream toolkit lowercases Unicode text and treats a word as a
maximal run of letters/digits with internal hyphens or apostrophes; other
non-space characters are punctuation. Exported token lists are the word-only
view, so score counts line up with the consumer's lexicon features.

Reimplemented here (rather than imported) so the packages stay coupled only
through the file format.
"""

from __future__ import annotations

import re

_WORD_RE = re.compile(r"[^\W_]+(?:['’\-][^\W_]+)*", re.UNICODE)


def word_tokens(text: str) -> list[str]:
    """Lowercased word tokens with their character offsets discarded."""
    return [m.group(0) for m in _WORD_RE.finditer(text.lower())]


def word_spans(text: str) -> list[tuple[str, int, int]]:
    """(word, start, end) character offsets into the lowercased text."""
    lowered = text.lower()
    return [(m.group(0), m.start(), m.end()) for m in _WORD_RE.finditer(lowered)]
