"""Psycholinguistic word tables, the NBSVM crudeness scorer, and word lists.

Aggregate lookups skip words missing from a table and report coverage;
combined per-word features elsewhere use constant defaults instead
(age-of-acquisition 25.0, funniness 0.0) so ratios stay defined.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import corpus
from .errors import FormatVersionError, InputError
from .util import canonical_json

log = logging.getLogger(__name__)

NBSVM_FORMAT = "IGGY-NBSVM-1"
TABLE_KINDS = ("aoa", "funniness", "valence")

# Defaults for absent words in combined per-word features.
DEFAULT_AOA = 25.0
DEFAULT_FUNNINESS = 0.0
BENIGN_PROB_FLOOR = 1e-4


@dataclass
class WordValueTable:
    kind: str
    entries: dict[str, float]
    default: Optional[float] = None

    def value(self, word: str) -> Optional[float]:
        """Table value, the default for absent words, or None (skip policy)."""
        got = self.entries.get(word.lower())
        if got is not None:
            return got
        return self.default


def load_word_table(path: str, kind: str, default: Optional[float] = None) -> WordValueTable:
    """TSV ``word<TAB>value`` with no header; duplicates keep the first row."""
    if kind not in TABLE_KINDS:
        raise InputError(f"unknown word table kind {kind!r}")
    entries: dict[str, float] = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read word table {path}: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected word<TAB>value")
            word = parts[0].strip().lower()
            if not word:
                raise InputError(f"{path}:{lineno}: empty word")
            try:
                value = float(parts[1])
            except ValueError:
                raise InputError(f"{path}:{lineno}: value {parts[1]!r} is not numeric") from None
            if not math.isfinite(value):
                raise InputError(f"{path}:{lineno}: value must be finite")
            if kind == "aoa" and value <= 0:
                raise InputError(f"{path}:{lineno}: age-of-acquisition must be positive")
            if word in entries:
                log.warning("%s:%d: duplicate word %r, keeping first value", path, lineno, word)
                continue
            entries[word] = value
    if not entries:
        raise InputError(f"{path}: word table is empty")
    return WordValueTable(kind=kind, entries=entries, default=default)


def lookup_stats(table: WordValueTable, words: Sequence[str]) -> dict[str, float]:
    """Aggregate stats over the words present in the table.

    Returns mean/max/min/variance plus coverage = found/total.  No words
    found (or an empty word list) yields all zeros with coverage 0.
    """
    found = [table.entries[w.lower()] for w in words if w.lower() in table.entries]
    if not found:
        return {"mean": 0.0, "max": 0.0, "min": 0.0, "variance": 0.0, "coverage": 0.0}
    found.sort()  # fixed summation order keeps the stats permutation-invariant
    n = len(found)
    mean = sum(found) / n
    var = sum((v - mean) ** 2 for v in found) / n
    return {
        "mean": mean,
        "max": max(found),
        "min": min(found),
        "variance": var,
        "coverage": n / len(words),
    }


def _doc_ngrams(text: str) -> set[str]:
    words = corpus.words_of(corpus.tokenize(text))
    grams = set(words)
    grams.update(f"{a} {b}" for a, b in zip(words, words[1:]))
    return grams


@dataclass
class NbsvmModel:
    """Linear classifier over log-count-ratio scaled bag-of-ngram features."""

    vocabulary: dict[str, int]
    r: np.ndarray
    w: np.ndarray
    bias: float
    beta: float

    def score(self, text: str) -> float:
        total = self.bias
        for gram in _doc_ngrams(text):
            idx = self.vocabulary.get(gram)
            if idx is not None:
                total += self.r[idx] * self.w[idx]
        return total


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _normalize_label(label) -> int:
    if label in (1, "crude"):
        return 1
    if label in (0, "benign"):
        return 0
    raise InputError(f"crudeness label must be 0/benign or 1/crude, got {label!r}")


def log_count_ratio(presence: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """r = ln((p+1)/|p+1|_1) - ln((q+1)/|q+1|_1) for presence-count vectors.

    Evaluated as a single log of the normalized ratio, which is exact on
    small integer counts."""
    p = presence[labels == 1].sum(axis=0) + 1.0
    q = presence[labels == 0].sum(axis=0) + 1.0
    return np.log((p / p.sum()) / (q / q.sum()))


def train_nbsvm(
    docs: Sequence[tuple[str, object]],
    beta: float = 0.25,
    l2: float = 1e-3,
    iterations: int = 600,
    lr: float = 0.1,
) -> NbsvmModel:
    """Train the crudeness model: logistic loss over r-scaled presence features,
    then weights interpolated toward their mean magnitude by beta."""
    if not 0.0 <= beta <= 1.0:
        raise InputError("beta must lie in [0, 1]")
    labels = np.array([_normalize_label(lab) for _, lab in docs], dtype=float)
    if len(set(labels.tolist())) < 2:
        raise InputError("crudeness training needs both classes")

    gram_sets = [_doc_ngrams(text) for text, _ in docs]
    vocabulary = {g: i for i, g in enumerate(sorted(set().union(*gram_sets)))}
    if not vocabulary:
        raise InputError("no n-gram features found in crudeness training data")

    presence = np.zeros((len(docs), len(vocabulary)))
    for row, grams in enumerate(gram_sets):
        for gram in grams:
            presence[row, vocabulary[gram]] = 1.0

    r = log_count_ratio(presence, labels)
    scaled = presence * r

    # Convex objective and zero init make the fit deterministic.
    w = np.zeros(len(vocabulary))
    bias = 0.0
    m_w = np.zeros_like(w)
    v_w = np.zeros_like(w)
    m_b = v_b = 0.0
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    n = len(docs)
    for step in range(1, iterations + 1):
        probs = _sigmoid(scaled @ w + bias)
        err = probs - labels
        grad_w = scaled.T @ err / n + l2 * w
        grad_b = float(err.mean())
        m_w = beta1 * m_w + (1 - beta1) * grad_w
        v_w = beta2 * v_w + (1 - beta2) * grad_w**2
        m_b = beta1 * m_b + (1 - beta1) * grad_b
        v_b = beta2 * v_b + (1 - beta2) * grad_b**2
        scale = math.sqrt(1 - beta2**step) / (1 - beta1**step)
        w -= lr * scale * m_w / (np.sqrt(v_w) + eps)
        bias -= lr * scale * m_b / (math.sqrt(v_b) + eps)

    w_bar = float(np.abs(w).mean())
    w_final = beta * w_bar + (1.0 - beta) * w
    return NbsvmModel(vocabulary=vocabulary, r=r, w=w_final, bias=float(bias), beta=beta)


def crudeness_prob(model: NbsvmModel, text: str) -> float:
    return float(_sigmoid(np.array(model.score(text))))


def word_benign_prob(model: NbsvmModel, word: str) -> float:
    """1 - crudeness of the single-word document, floored so ratios stay finite."""
    benign = 1.0 - crudeness_prob(model, word)
    return min(1.0, max(BENIGN_PROB_FLOOR, benign))


def save_nbsvm(model: NbsvmModel, path: str) -> None:
    payload = {
        "format": NBSVM_FORMAT,
        "beta": model.beta,
        "bias": model.bias,
        "vocabulary": model.vocabulary,
        "r": model.r.tolist(),
        "w": model.w.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(payload))


def load_nbsvm(path: str) -> NbsvmModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot load NBSVM model {path}: {exc}") from None
    if payload.get("format") != NBSVM_FORMAT:
        raise FormatVersionError(
            f"{path}: expected format {NBSVM_FORMAT}, got {payload.get('format')!r}")
    return NbsvmModel(
        vocabulary={k: int(v) for k, v in payload["vocabulary"].items()},
        r=np.array(payload["r"]),
        w=np.array(payload["w"]),
        bias=float(payload["bias"]),
        beta=float(payload["beta"]),
    )


def load_crudeness_csv(path: str) -> list[tuple[str, int]]:
    """CSV ``text,label`` with label 1 = crude."""
    docs = []
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot read crudeness data {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) < {"text", "label"}:
            raise InputError(f"{path}: crudeness CSV needs header 'text,label'")
        for lineno, row in enumerate(reader, start=2):
            try:
                label = int(row["label"])
            except (TypeError, ValueError):
                raise InputError(f"{path}:{lineno}: label must be 0 or 1") from None
            if label not in (0, 1):
                raise InputError(f"{path}:{lineno}: label must be 0 or 1")
            docs.append((row["text"] or "", label))
    if not docs:
        raise InputError(f"{path}: crudeness CSV is empty")
    return docs


@dataclass(frozen=True)
class ConnotationLists:
    whitelist: frozenset[str]
    blacklist: frozenset[str]

    def __post_init__(self) -> None:
        overlap = self.whitelist & self.blacklist
        if overlap:
            raise InputError(
                f"connotation lists overlap: {', '.join(sorted(overlap)[:5])}")


def load_word_list(path: str) -> frozenset[str]:
    """Plain text, one lowercase word per line; blanks ignored."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return frozenset(w.strip().lower() for w in fh if w.strip())
    except OSError as exc:
        raise InputError(f"cannot read word list {path}: {exc}") from None


def connotation_flags(lists: ConnotationLists, words: Iterable[str]) -> dict[str, bool]:
    lowered = {w.lower() for w in words}
    return {
        "has_white": bool(lowered & lists.whitelist),
        "has_black": bool(lowered & lists.blacklist),
    }
