"""Corpus ingestion, tokenization, venue-to-field mapping, and dataset splits.

Tokenization contract (shared with every downstream consumer, including the
external score exporter): text is Unicode-lowercased, a word is a maximal run
of letters/digits that may contain internal hyphens or apostrophes, and every
other non-space character is emitted as its own non-word token.
"""

from __future__ import annotations

import csv
import json
import math
import random
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import InputError

FIELD_NAMES = ("neuroscience", "medicine", "biology", "exact_sciences", "unknown")

# Word: alnum runs joined by internal ' / ’ / -.  Fallback: any single
# non-space character (punctuation, symbols, underscore).
_TOKEN_RE = re.compile(r"[^\W_]+(?:['’\-][^\W_]+)*|\S", re.UNICODE)


@dataclass(frozen=True)
class Token:
    surface: str
    is_word: bool


def tokenize(text: str) -> list[Token]:
    """Deterministic lowercasing tokenizer; empty input yields an empty list."""
    lowered = text.lower()
    out = []
    for match in _TOKEN_RE.finditer(lowered):
        surface = match.group(0)
        out.append(Token(surface=surface, is_word=surface[0].isalnum()))
    return out


def words_of(tokens: Sequence[Token]) -> list[str]:
    """Word-only view used by lexicon lookups."""
    return [t.surface for t in tokens if t.is_word]


@dataclass
class TitleRecord:
    id: str
    text: str
    field: str = "unknown"
    label: Optional[int] = None
    venue: Optional[str] = None
    tokens: Optional[list[Token]] = None
    pos: Optional[list[str]] = None

    def __post_init__(self) -> None:
        if self.field not in FIELD_NAMES:
            raise InputError(f"record {self.id!r}: unknown field {self.field!r}")
        if self.label is not None and self.label not in (0, 1):
            raise InputError(f"record {self.id!r}: label must be 0 or 1")
        if self.pos is not None and self.tokens is not None and len(self.pos) != len(self.tokens):
            raise InputError(f"record {self.id!r}: POS tags and tokens differ in length")

    def ensure_tokens(self) -> list[Token]:
        if self.tokens is None:
            self.tokens = tokenize(self.text)
        return self.tokens

    def words(self) -> list[str]:
        return words_of(self.ensure_tokens())


def _parse_label(raw, where: str) -> Optional[int]:
    if raw is None or raw == "":
        return None
    try:
        value = int(raw)
    except (TypeError, ValueError):
        raise InputError(f"{where}: label {raw!r} is not an integer") from None
    if value not in (0, 1):
        raise InputError(f"{where}: label must be 0 or 1, got {value}")
    return value


def _check_field(raw, where: str) -> str:
    fieldname = raw or "unknown"
    if fieldname not in FIELD_NAMES:
        raise InputError(f"{where}: unknown field {fieldname!r}")
    return fieldname


def load_corpus(path: str, format: str = "jsonl") -> list[TitleRecord]:
    """Load title records from JSONL, TSV (with header), or plain lines.

    Ids default to the 1-based line number when absent.  Malformed lines and
    duplicate ids raise :class:`InputError` naming the offending line.
    """
    if format not in ("jsonl", "tsv", "plain_lines"):
        raise InputError(f"unknown corpus format {format!r}")
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read corpus {path}: {exc}") from None

    records: list[TitleRecord] = []
    seen_ids: set[str] = set()
    with fh:
        if format == "tsv":
            reader = csv.DictReader(fh, delimiter="\t")
            if reader.fieldnames is None or "title" not in reader.fieldnames:
                raise InputError(f"{path}: TSV corpus needs a header with a 'title' column")
            for lineno, row in enumerate(reader, start=2):
                where = f"{path}:{lineno}"
                title = row.get("title")
                if not title:
                    raise InputError(f"{where}: missing title")
                rec = TitleRecord(
                    id=row.get("id") or str(lineno - 1),
                    text=title,
                    field=_check_field(row.get("field"), where),
                    label=_parse_label(row.get("label"), where),
                    venue=row.get("venue") or None,
                )
                _push_record(records, seen_ids, rec, where)
        else:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                where = f"{path}:{lineno}"
                if format == "plain_lines":
                    rec = TitleRecord(id=str(lineno), text=line)
                else:
                    try:
                        obj = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise InputError(f"{where}: bad JSON ({exc.msg})") from None
                    if not isinstance(obj, dict) or "title" not in obj:
                        raise InputError(f"{where}: object with a 'title' key required")
                    rec = TitleRecord(
                        id=str(obj.get("id", lineno)),
                        text=str(obj["title"]),
                        field=_check_field(obj.get("field"), where),
                        label=_parse_label(obj.get("label"), where),
                        venue=obj.get("venue"),
                    )
                _push_record(records, seen_ids, rec, where)
    return records


def _push_record(records, seen_ids, rec, where):
    if rec.id in seen_ids:
        raise InputError(f"{where}: duplicate id {rec.id!r}")
    seen_ids.add(rec.id)
    records.append(rec)


def load_venue_map(path: str) -> dict[str, str]:
    """CSV with header ``venue,field``; duplicate venues must agree on field."""
    mapping: dict[str, str] = {}
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot read venue map {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) < {"venue", "field"}:
            raise InputError(f"{path}: venue map needs header 'venue,field'")
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            venue = (row["venue"] or "").strip().lower()
            fieldname = (row["field"] or "").strip()
            if not venue:
                raise InputError(f"{where}: empty venue")
            if fieldname not in FIELD_NAMES:
                raise InputError(f"{where}: unknown field {fieldname!r}")
            if venue in mapping and mapping[venue] != fieldname:
                raise InputError(f"{where}: venue {venue!r} mapped to both "
                                 f"{mapping[venue]!r} and {fieldname!r}")
            mapping[venue] = fieldname
    return mapping


def assign_fields(records: Iterable[TitleRecord], venue_map: dict[str, str]) -> list[TitleRecord]:
    """Set each record's field from its venue (case-insensitive exact match)."""
    out = []
    for rec in records:
        if rec.venue:
            mapped = venue_map.get(rec.venue.strip().lower())
            if mapped is not None:
                rec.field = mapped
        out.append(rec)
    return out


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, ...]
    seed: int
    names: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.ratios) != len(self.names):
            raise InputError("SplitSpec: ratios and names differ in length")
        if any(r < 0 for r in self.ratios):
            raise InputError("SplitSpec: ratios must be non-negative")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise InputError(f"SplitSpec: ratios sum to {sum(self.ratios)}, expected 1")


def _largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    """Integer quotas summing to n; ties broken by position order."""
    exact = [r * n for r in ratios]
    quotas = [math.floor(x) for x in exact]
    short = n - sum(quotas)
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - quotas[i]), i))
    for i in order[:short]:
        quotas[i] += 1
    return quotas


def _stratum_key(rec: TitleRecord) -> tuple:
    return (rec.label if rec.label is not None else -1, rec.field)


def split_dataset(records: Sequence[TitleRecord], spec: SplitSpec) -> dict[str, list[TitleRecord]]:
    """Partition records into named splits, stratified by (label, field).

    Largest-remainder rounding inside every stratum keeps each (label, field)
    cell within one record of its target ratio.  Output preserves corpus order.
    """
    rng = random.Random(spec.seed)
    strata: dict[tuple, list[int]] = {}
    for idx, rec in enumerate(records):
        strata.setdefault(_stratum_key(rec), []).append(idx)

    assignment: dict[int, str] = {}
    for key in sorted(strata):
        indices = list(strata[key])
        rng.shuffle(indices)
        quotas = _largest_remainder(len(indices), spec.ratios)
        pos = 0
        for name, quota in zip(spec.names, quotas):
            for idx in indices[pos:pos + quota]:
                assignment[idx] = name
            pos += quota

    out: dict[str, list[TitleRecord]] = {name: [] for name in spec.names}
    for idx, rec in enumerate(records):
        out[assignment[idx]].append(rec)
    return out


def make_ig_retrieval_split(
    records: Sequence[TitleRecord],
    winner_ids: Iterable[str],
    seed: int,
    ensemble_fraction: Optional[float] = None,
) -> dict[str, list[TitleRecord]]:
    """Build the winners-retrieval split: test = winners + equal random negatives.

    The remainder becomes the train set; with ``ensemble_fraction`` it is
    further split (stratified) into train and ensemble_train.  A fraction of
    18/88 reproduces an overall 70/18/12 division on a balanced corpus.
    """
    winners = set(winner_ids)
    by_id = {rec.id: rec for rec in records}
    for wid in sorted(winners):
        rec = by_id.get(wid)
        if rec is None:
            raise InputError(f"winner id {wid!r} not present in corpus")
        if rec.label != 1:
            raise InputError(f"winner id {wid!r} is not labeled positive")

    negatives = [rec for rec in records if rec.label == 0]
    if len(negatives) < len(winners):
        raise InputError(
            f"need {len(winners)} negative titles for the test set, have {len(negatives)}")
    rng = random.Random(seed)
    sampled = set(rec.id for rec in rng.sample(negatives, len(winners)))

    test_ids = winners | sampled
    test = [rec for rec in records if rec.id in test_ids]
    rest = [rec for rec in records if rec.id not in test_ids]
    if not any(rec.label == 1 for rec in rest):
        raise InputError("no positive titles left to train on after removing winners")

    if ensemble_fraction is None:
        return {"train": rest, "test": test}
    spec = SplitSpec(ratios=(1.0 - ensemble_fraction, ensemble_fraction),
                     seed=seed, names=("train", "ensemble_train"))
    inner = split_dataset(rest, spec)
    return {"train": inner["train"], "ensemble_train": inner["ensemble_train"], "test": test}
