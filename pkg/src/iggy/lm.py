"""Add-k smoothed n-gram language models over words or POS tags.

The per-word quantity everywhere in this package is surprisal in nats,
-ln p(word | context).  Exponentiating would give a per-word perplexity;
since that is a monotone transform, surprisal is used directly as the
feature value.

Rare words (corpus frequency below ``min_count``) are collapsed to an UNK
sentinel at training and query time.  Titles are padded with n-1 start
sentinels and closed with a single end-of-title sentinel, which is predicted
like any other vocabulary item.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field as dc_field
from typing import Iterable, Optional, Sequence

from .errors import ChecksumError, FormatVersionError, InputError, NumericError
from .util import canonical_json, crc32_of, population_stats

LM_FORMAT = "IGGY-LM-1"
START = "<s>"
END = "</s>"
UNK = "<unk>"

EXTERNAL_MODEL_TAGS = ("bert", "scibert", "gpt2", "other")


@dataclass(frozen=True)
class SurprisalStats:
    mean: float
    max: float
    min: float
    variance: float
    empty: bool = False

    def as_dict(self) -> dict[str, float]:
        return {"mean": self.mean, "max": self.max, "min": self.min, "variance": self.variance}


def stats_from_values(values: Sequence[float]) -> SurprisalStats:
    if not values:
        return SurprisalStats(0.0, 0.0, 0.0, 0.0, empty=True)
    mean, vmax, vmin, var = population_stats(list(values))
    return SurprisalStats(mean, vmax, vmin, var)


class NGramModel:
    """Immutable after training; safe for concurrent read-only use."""

    def __init__(self, n: int, smoothing_k: float, min_count: int, source_tag: str = ""):
        if n not in (1, 2, 3):
            raise InputError(f"n-gram order must be 1, 2, or 3, got {n}")
        if smoothing_k <= 0:
            raise InputError("smoothing_k must be positive")
        self.n = n
        self.smoothing_k = smoothing_k
        self.min_count = min_count
        self.source_tag = source_tag
        self.vocab: set[str] = {UNK, END}
        self.counts: dict[tuple[str, ...], dict[str, int]] = {}
        self.context_totals: dict[tuple[str, ...], int] = {}

    def map_token(self, token: str) -> str:
        if token == START:
            return START
        return token if token in self.vocab else UNK

    def _context(self, context: Sequence[str]) -> tuple[str, ...]:
        if self.n == 1:
            return ()
        window = [START] * max(0, self.n - 1 - len(context)) + [
            self.map_token(t) for t in context[-(self.n - 1):]
        ]
        return tuple(window)

    def prob(self, context: Sequence[str], word: str) -> float:
        ctx = self._context(context)
        w = self.map_token(word)
        count = self.counts.get(ctx, {}).get(w, 0)
        total = self.context_totals.get(ctx, 0)
        v = len(self.vocab)
        return (count + self.smoothing_k) / (total + self.smoothing_k * v)

    def surprisal(self, context: Sequence[str], word: str) -> float:
        return -math.log(self.prob(context, word))

    def sequence_surprisals(self, tokens: Sequence[str], include_end: bool = True) -> list[float]:
        """Per-position surprisals for a title, optionally with the END step."""
        out = []
        history: list[str] = []
        for tok in tokens:
            out.append(self.surprisal(history, tok))
            history.append(tok)
        if include_end and tokens:
            out.append(self.surprisal(history, END))
        return out


def train_ngram(
    sequences: Iterable[Sequence[str]],
    n: int,
    smoothing_k: float = 1.0,
    min_count: int = 2,
    source_tag: str = "",
) -> NGramModel:
    seqs = [list(s) for s in sequences]
    if not seqs:
        raise InputError("cannot train an n-gram model on an empty corpus")
    model = NGramModel(n=n, smoothing_k=smoothing_k, min_count=min_count, source_tag=source_tag)

    freq = Counter(tok for seq in seqs for tok in seq)
    model.vocab = {w for w, c in freq.items() if c >= min_count} | {UNK, END}

    for seq in seqs:
        mapped = [model.map_token(t) for t in seq] + [END]
        padded = [START] * (n - 1) + mapped
        for i in range(n - 1, len(padded)):
            ctx = tuple(padded[i - n + 1:i])
            word = padded[i]
            slot = model.counts.setdefault(ctx, {})
            slot[word] = slot.get(word, 0) + 1
            model.context_totals[ctx] = model.context_totals.get(ctx, 0) + 1
    return model


def word_surprisal(model: NGramModel, context: Sequence[str], word: str) -> float:
    return model.surprisal(context, word)


def title_surprisal_stats(model: NGramModel, tokens: Sequence[str]) -> SurprisalStats:
    return stats_from_values(model.sequence_surprisals(tokens))


def pos_surprisal_stats(pos_model: NGramModel, pos_tags: Sequence[str]) -> SurprisalStats:
    return stats_from_values(pos_model.sequence_surprisals(pos_tags))


_CTX_SEP = "\x1f"


def serialize_model(model: NGramModel, path: str) -> None:
    payload = {
        "n": model.n,
        "smoothing_k": model.smoothing_k,
        "min_count": model.min_count,
        "source_tag": model.source_tag,
        "vocab": sorted(model.vocab),
        "counts": {_CTX_SEP.join(ctx): words for ctx, words in sorted(model.counts.items())},
    }
    body = canonical_json(payload)
    container = {"format": LM_FORMAT, "crc32": crc32_of(body), "payload": payload}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(container))


def load_model(path: str) -> NGramModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            container = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read model {path}: {exc}") from None
    except json.JSONDecodeError:
        raise ChecksumError(f"{path}: model file is truncated or corrupt") from None
    fmt = container.get("format")
    if fmt != LM_FORMAT:
        raise FormatVersionError(f"{path}: expected format {LM_FORMAT}, got {fmt!r}")
    payload = container.get("payload")
    if payload is None or crc32_of(canonical_json(payload)) != container.get("crc32"):
        raise ChecksumError(f"{path}: checksum mismatch")

    model = NGramModel(
        n=payload["n"],
        smoothing_k=payload["smoothing_k"],
        min_count=payload["min_count"],
        source_tag=payload.get("source_tag", ""),
    )
    model.vocab = set(payload["vocab"])
    model.counts = {
        tuple(ctx.split(_CTX_SEP)) if ctx else (): {w: int(c) for w, c in words.items()}
        for ctx, words in payload["counts"].items()
    }
    model.context_totals = {ctx: sum(words.values()) for ctx, words in model.counts.items()}
    return model


@dataclass
class ExternalScoreTable:
    """Per-title token scores (and optional embeddings) from an external model."""

    model_tag: str
    tokens: dict[str, list[str]] = dc_field(default_factory=dict)
    scores: dict[str, list[float]] = dc_field(default_factory=dict)
    embeddings: dict[str, list[float]] = dc_field(default_factory=dict)
    embedding_dim: Optional[int] = None

    def ids(self) -> list[str]:
        return list(self.tokens)

    def stats(self, title_id: str) -> SurprisalStats:
        if title_id not in self.scores:
            raise InputError(f"no external scores for title {title_id!r} "
                             f"(model {self.model_tag})")
        return stats_from_values(self.scores[title_id])

    def embedding(self, title_id: str) -> list[float]:
        if title_id not in self.embeddings:
            raise InputError(f"no embedding for title {title_id!r} (model {self.model_tag})")
        return self.embeddings[title_id]


def import_external_scores(path: str) -> ExternalScoreTable:
    """Read the interchange JSONL written by the score exporter.

    One title per line: ``{"id", "model", "tokens", "scores", "embedding"?}``
    with scores in nats.  Validation is strict: score/token length mismatches,
    non-finite scores, and inconsistent embedding dimensions are errors.
    """
    table: Optional[ExternalScoreTable] = None
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read external scores {path}: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{where}: bad JSON ({exc.msg})") from None
            for key in ("id", "model", "tokens", "scores"):
                if key not in obj:
                    raise InputError(f"{where}: missing key {key!r}")
            tag = obj["model"]
            if tag not in EXTERNAL_MODEL_TAGS:
                raise InputError(f"{where}: unknown model tag {tag!r}")
            if table is None:
                table = ExternalScoreTable(model_tag=tag)
            elif table.model_tag != tag:
                raise InputError(f"{where}: mixed model tags "
                                 f"({table.model_tag!r} then {tag!r})")
            title_id = str(obj["id"])
            if title_id in table.tokens:
                raise InputError(f"{where}: duplicate title id {title_id!r}")
            tokens = [str(t) for t in obj["tokens"]]
            scores = obj["scores"]
            if len(tokens) != len(scores):
                raise InputError(
                    f"{where}: title {title_id!r} has {len(tokens)} tokens "
                    f"but {len(scores)} scores")
            try:
                scores = [float(s) for s in scores]
            except (TypeError, ValueError):
                raise NumericError(
                    f"{where}: non-numeric score for title {title_id!r}") from None
            if any(not math.isfinite(s) for s in scores):
                raise NumericError(f"{where}: non-finite score for title {title_id!r}")
            table.tokens[title_id] = tokens
            table.scores[title_id] = scores
            if "embedding" in obj and obj["embedding"] is not None:
                try:
                    emb = [float(x) for x in obj["embedding"]]
                except (TypeError, ValueError):
                    raise NumericError(
                        f"{where}: non-numeric embedding for {title_id!r}") from None
                if any(not math.isfinite(x) for x in emb):
                    raise NumericError(f"{where}: non-finite embedding for {title_id!r}")
                if table.embedding_dim is None:
                    table.embedding_dim = len(emb)
                elif table.embedding_dim != len(emb):
                    raise InputError(
                        f"{where}: embedding dimension {len(emb)} for {title_id!r} "
                        f"differs from {table.embedding_dim}")
                table.embeddings[title_id] = emb
    if table is None:
        raise InputError(f"{path}: no records in external score file")
    return table
