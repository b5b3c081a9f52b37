"""Averaged-perceptron part-of-speech tagger with greedy left-to-right decoding.

Pre-tagged input is always accepted downstream, so this tagger is a
convenience for corpora that arrive untagged.  Training is deterministic for
a fixed seed and serialization is byte-stable.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .corpus import Token
from .errors import FormatVersionError, InputError
from .util import canonical_json

POS_FORMAT = "IGGY-POS-1"

_START = ("-START2-", "-START-")
_END = ("-END-", "-END2-")


def _normalize(word: str) -> str:
    if word.isdigit() and len(word) == 4:
        return "!YEAR"
    if word and word[0].isdigit():
        return "!DIGITS"
    return word.lower()


def _features(i: int, word: str, context: Sequence[str], prev: str, prev2: str) -> list[str]:
    """Feature strings for the word at padded-context position i."""
    feats = [
        "bias",
        "i suffix " + word[-3:],
        "i pref1 " + word[0],
        "i word " + context[i],
        "i-1 tag " + prev,
        "i-2 tag " + prev2,
        "i tag+i-2 tag " + prev + " " + prev2,
        "i-1 word " + context[i - 1],
        "i-1 suffix " + context[i - 1][-3:],
        "i-2 word " + context[i - 2],
        "i+1 word " + context[i + 1],
        "i+1 suffix " + context[i + 1][-3:],
        "i+2 word " + context[i + 2],
    ]
    if "-" in word and not word.startswith("-"):
        feats.append("i hyphen")
    if word[0].isdigit():
        feats.append("i digit")
    return feats


@dataclass
class PosTaggerModel:
    weights: dict[str, dict[str, float]]
    tagset: list[str]
    version: str = POS_FORMAT
    heldout_accuracy: Optional[float] = None

    def predict(self, feats: Sequence[str]) -> str:
        scores: dict[str, float] = dict.fromkeys(self.tagset, 0.0)
        for feat in feats:
            per_tag = self.weights.get(feat)
            if not per_tag:
                continue
            for tag, weight in per_tag.items():
                scores[tag] += weight
        # Highest score wins; ties resolved by tag name for determinism.
        return max(self.tagset, key=lambda t: (scores[t], t))


def pos_tag(model: PosTaggerModel, tokens: Sequence) -> list[str]:
    """Greedy decode; accepts Token objects or plain strings."""
    words = [t.surface if isinstance(t, Token) else str(t) for t in tokens]
    if not words:
        return []
    context = list(_START) + [_normalize(w) for w in words] + list(_END)
    prev, prev2 = _START[1], _START[0]
    tags = []
    for i, word in enumerate(words):
        feats = _features(i + 2, _normalize(word), context, prev, prev2)
        tag = model.predict(feats)
        tags.append(tag)
        prev2, prev = prev, tag
    return tags


class _AveragedTrainer:
    """Accumulates perceptron updates and produces averaged weights."""

    def __init__(self) -> None:
        self.weights: dict[str, dict[str, float]] = {}
        self._totals: dict[tuple[str, str], float] = {}
        self._stamps: dict[tuple[str, str], int] = {}
        self.instances = 0

    def update(self, truth: str, guess: str, feats: Sequence[str]) -> None:
        self.instances += 1
        if truth == guess:
            return
        for feat in feats:
            per_tag = self.weights.setdefault(feat, {})
            self._bump(feat, truth, per_tag, 1.0)
            self._bump(feat, guess, per_tag, -1.0)

    def _bump(self, feat: str, tag: str, per_tag: dict[str, float], delta: float) -> None:
        key = (feat, tag)
        current = per_tag.get(tag, 0.0)
        self._totals[key] = self._totals.get(key, 0.0) + (self.instances - self._stamps.get(key, 0)) * current
        self._stamps[key] = self.instances
        per_tag[tag] = current + delta

    def averaged(self) -> dict[str, dict[str, float]]:
        out: dict[str, dict[str, float]] = {}
        for feat, per_tag in self.weights.items():
            kept = {}
            for tag, weight in per_tag.items():
                key = (feat, tag)
                total = self._totals.get(key, 0.0) + (self.instances - self._stamps.get(key, 0)) * weight
                avg = total / self.instances
                if avg:
                    kept[tag] = round(avg, 9)
            if kept:
                out[feat] = kept
        return out


def train_pos_tagger(
    tagged_sentences: Sequence[Sequence[tuple[str, str]]],
    epochs: int = 5,
    seed: int = 0,
    heldout_fraction: float = 0.1,
) -> PosTaggerModel:
    """Train on (word, tag) sequences; reports held-out tag accuracy when the
    corpus is large enough to spare a held-out slice."""
    sentences = [list(s) for s in tagged_sentences if s]
    if not sentences:
        raise InputError("cannot train POS tagger on an empty corpus")
    tagset = sorted({tag for sent in sentences for _, tag in sent})

    rng = random.Random(seed)
    order = list(range(len(sentences)))
    rng.shuffle(order)
    n_heldout = int(len(sentences) * heldout_fraction)
    heldout = [sentences[i] for i in order[:n_heldout]]
    train = [sentences[i] for i in order[n_heldout:]]
    if not train:
        train, heldout = heldout, []

    trainer = _AveragedTrainer()
    model = PosTaggerModel(weights=trainer.weights, tagset=tagset)
    for _ in range(epochs):
        rng.shuffle(train)
        for sent in train:
            words = [w for w, _ in sent]
            context = list(_START) + [_normalize(w) for w in words] + list(_END)
            prev, prev2 = _START[1], _START[0]
            for i, (word, truth) in enumerate(sent):
                feats = _features(i + 2, _normalize(word), context, prev, prev2)
                guess = model.predict(feats)
                trainer.update(truth, guess, feats)
                prev2, prev = prev, guess

    model = PosTaggerModel(weights=trainer.averaged(), tagset=tagset)
    if heldout:
        total = correct = 0
        for sent in heldout:
            gold = [t for _, t in sent]
            pred = pos_tag(model, [w for w, _ in sent])
            total += len(gold)
            correct += sum(1 for g, p in zip(gold, pred) if g == p)
        model.heldout_accuracy = correct / total if total else None
    return model


def read_tagged_corpus(path: str) -> list[list[tuple[str, str]]]:
    """One sentence per line, ``word_TAG`` pairs separated by spaces."""
    sentences = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read tagged corpus {path}: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            sent = []
            for chunk in line.split():
                if "_" not in chunk:
                    raise InputError(f"{path}:{lineno}: token {chunk!r} lacks a _TAG suffix")
                word, tag = chunk.rsplit("_", 1)
                if not word or not tag:
                    raise InputError(f"{path}:{lineno}: malformed pair {chunk!r}")
                sent.append((word.lower(), tag))
            sentences.append(sent)
    if not sentences:
        raise InputError(f"{path}: tagged corpus is empty")
    return sentences


def save_tagger(model: PosTaggerModel, path: str) -> None:
    payload = {
        "format": POS_FORMAT,
        "tagset": model.tagset,
        "weights": model.weights,
        "heldout_accuracy": model.heldout_accuracy,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(payload))


def load_tagger(path: str) -> PosTaggerModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot load tagger {path}: {exc}") from None
    if payload.get("format") != POS_FORMAT:
        raise FormatVersionError(
            f"{path}: expected format {POS_FORMAT}, got {payload.get('format')!r}")
    return PosTaggerModel(
        weights=payload["weights"],
        tagset=list(payload["tagset"]),
        heldout_accuracy=payload.get("heldout_accuracy"),
    )
