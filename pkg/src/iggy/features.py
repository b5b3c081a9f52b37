"""Canonical feature registry and per-title feature extraction.

The default registry enumerates 85 features when every internal resource is
available (nine n-gram LM sources with four surprisal stats each, the
simplicity family, the crudeness family, and the funniness family) and grows
by three stats per external transformer score table.  docs/FEATURES.md lists
the registry and is kept in sync by a test.

Extraction is a pure function of (record, resources, spec); rows are finite
for all inputs because per-word denominators are floored and absent lexicon
words fall back to fixed defaults.
"""

from __future__ import annotations

import csv
import json
import multiprocessing
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .corpus import TitleRecord, Token
from .errors import FormatVersionError, InputError, NumericError
from .lexicons import (
    DEFAULT_AOA,
    DEFAULT_FUNNINESS,
    ConnotationLists,
    NbsvmModel,
    WordValueTable,
    crudeness_prob,
    lookup_stats,
    word_benign_prob,
)
from .lm import ExternalScoreTable, NGramModel, SurprisalStats, stats_from_values
from .util import canonical_json, sha256_of_bytes

SPEC_FORMAT = "IGGY-SPEC-1"
FAMILIES = ("unexpected", "simple", "crude", "funny", "meta")
STATS4 = ("mean", "max", "min", "var")
STATS3 = ("mean", "max", "var")
NOUN_TAGS = frozenset({"NOUN", "PROPN"})
SENTENCE_FINAL = frozenset({".", "!", "?"})


@dataclass(frozen=True)
class FeatureDescriptor:
    name: str
    family: str
    source: str
    stat: str


class FeatureSpec:
    """Ordered, named feature registry; order is stable across runs."""

    def __init__(self, descriptors: Sequence[FeatureDescriptor]):
        names = [d.name for d in descriptors]
        if len(set(names)) != len(names):
            raise InputError("feature names must be unique")
        self.descriptors: tuple[FeatureDescriptor, ...] = tuple(descriptors)
        self._index = {d.name: i for i, d in enumerate(self.descriptors)}

    def __len__(self) -> int:
        return len(self.descriptors)

    def names(self) -> list[str]:
        return [d.name for d in self.descriptors]

    def index(self, name: str) -> int:
        return self._index[name]

    def spec_hash(self) -> str:
        body = canonical_json([
            [d.name, d.family, d.source, d.stat] for d in self.descriptors
        ])
        return sha256_of_bytes(body.encode("utf-8"))

    def save(self, path: str) -> None:
        payload = {
            "format": SPEC_FORMAT,
            "features": [
                {"name": d.name, "family": d.family, "source": d.source, "stat": d.stat}
                for d in self.descriptors
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(payload))

    @classmethod
    def load(cls, path: str) -> "FeatureSpec":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                payload = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot load feature spec {path}: {exc}") from None
        if payload.get("format") != SPEC_FORMAT:
            raise FormatVersionError(
                f"{path}: expected format {SPEC_FORMAT}, got {payload.get('format')!r}")
        return cls([FeatureDescriptor(**d) for d in payload["features"]])


@dataclass
class Resources:
    """Immutable bundle of everything extraction can draw on."""

    title_lms: dict[int, NGramModel] = dc_field(default_factory=dict)
    jokes_lms: dict[int, NGramModel] = dc_field(default_factory=dict)
    pos_lms: dict[int, NGramModel] = dc_field(default_factory=dict)
    aoa: Optional[WordValueTable] = None
    funniness: Optional[WordValueTable] = None
    valence: Optional[WordValueTable] = None
    crudeness: Optional[NbsvmModel] = None
    connotations: Optional[ConnotationLists] = None
    familiar_words: frozenset[str] = frozenset()
    external: dict[str, ExternalScoreTable] = dc_field(default_factory=dict)

    def is_empty(self) -> bool:
        return not (self.title_lms or self.jokes_lms or self.pos_lms or self.aoa
                    or self.funniness or self.crudeness or self.external)


def default_feature_spec(resources: Resources) -> FeatureSpec:
    """Enumerate the canonical registry for the available resources."""
    if resources.is_empty():
        raise InputError("cannot build a feature spec from an empty resource set")

    feats: list[FeatureDescriptor] = []

    def add(name, family, source, stat):
        feats.append(FeatureDescriptor(name=name, family=family, source=source, stat=stat))

    for group, lms in (("title", resources.title_lms),
                       ("jokes", resources.jokes_lms),
                       ("pos", resources.pos_lms)):
        for order in sorted(lms):
            src = f"{group}_{order}gram"
            for stat in STATS4:
                add(f"surprisal_{src}_{stat}", "unexpected", src, stat)
    for tag in sorted(resources.external):
        for stat in STATS3:
            add(f"surprisal_{tag}_{stat}", "unexpected", f"external_{tag}", stat)

    add("title_word_count", "simple", "length", "scalar")
    for stat in STATS3:
        add(f"word_length_{stat}", "simple", "length", stat)
    add("ari", "simple", "readability", "scalar")
    add("dale_chall", "simple", "readability", "scalar")
    if resources.aoa:
        for stat in STATS3:
            add(f"aoa_{stat}", "simple", "aoa", stat)
        for order in sorted(resources.title_lms):
            src = f"title_{order}gram/aoa"
            for stat in STATS4:
                add(f"surprisal_aoa_ratio_{order}gram_{stat}", "simple", src, stat)

    if resources.crudeness:
        add("crudeness_prob", "crude", "nbsvm", "scalar")
        for order in sorted(resources.title_lms):
            src = f"title_{order}gram/benign"
            for stat in STATS4:
                add(f"surprisal_benign_ratio_{order}gram_{stat}", "crude", src, stat)

    if resources.funniness:
        for stat in STATS3:
            add(f"noun_funniness_{stat}", "funny", "funniness", stat)
        for order in sorted(resources.title_lms):
            src = f"title_{order}gram*funniness"
            for stat in STATS4:
                add(f"surprisal_funniness_product_{order}gram_{stat}", "funny", src, stat)

    return FeatureSpec(feats)


def sentence_count(tokens: Sequence[Token]) -> int:
    """One plus the number of sentence-final punctuation tokens."""
    return 1 + sum(1 for t in tokens if t.surface in SENTENCE_FINAL)


def ari(words: Sequence[str], sentences: int = 1) -> float:
    """Automated readability index; zero words yields 0."""
    if not words:
        return 0.0
    chars = sum(len(w) for w in words)
    return 4.71 * (chars / len(words)) + 0.5 * (len(words) / sentences) - 21.43


def dale_chall(words: Sequence[str], familiar: frozenset[str], sentences: int = 1) -> float:
    """Dale-Chall readability from the percentage of unfamiliar words."""
    if not words:
        return 0.0
    unfamiliar = sum(1 for w in words if w.lower() not in familiar)
    pct = 100.0 * unfamiliar / len(words)
    score = 0.1579 * pct + 0.0496 * (len(words) / sentences)
    if pct > 5.0:
        score += 3.6365
    return score


def combined_ratio_stats(surprisals: Sequence[float],
                         denominators: Sequence[float]) -> SurprisalStats:
    if len(surprisals) != len(denominators):
        raise InputError(
            f"ratio inputs differ in length: {len(surprisals)} vs {len(denominators)}")
    if any(d <= 0 for d in denominators):
        raise NumericError("ratio denominators must be positive")
    return stats_from_values([s / d for s, d in zip(surprisals, denominators)])


def combined_product_stats(surprisals: Sequence[float],
                           values: Sequence[float]) -> SurprisalStats:
    if len(surprisals) != len(values):
        raise InputError(
            f"product inputs differ in length: {len(surprisals)} vs {len(values)}")
    return stats_from_values([s * v for s, v in zip(surprisals, values)])


@dataclass
class FeatureVector:
    title_id: str
    values: np.ndarray
    missing_mask: np.ndarray  # bool, same length; set where inputs were empty


def _stat_of(stats: SurprisalStats, stat: str) -> float:
    return {"mean": stats.mean, "max": stats.max, "min": stats.min,
            "var": stats.variance}[stat]


class _RecordContext:
    """Lazily computed intermediate quantities for one record."""

    def __init__(self, record: TitleRecord, resources: Resources):
        self.record = record
        self.resources = resources
        self.tokens = record.ensure_tokens()
        self.surfaces = [t.surface for t in self.tokens]
        self.word_idx = [i for i, t in enumerate(self.tokens) if t.is_word]
        self.words = [self.tokens[i].surface for i in self.word_idx]
        self.sentences = sentence_count(self.tokens)
        self._seq_stats: dict[str, SurprisalStats] = {}
        self._word_surprisals: dict[int, list[float]] = {}

    def lm_for(self, source: str) -> NGramModel:
        group, rest = source.split("_", 1)
        order = int(rest[0])
        table = {"title": self.resources.title_lms,
                 "jokes": self.resources.jokes_lms,
                 "pos": self.resources.pos_lms}[group]
        if order not in table:
            raise InputError(f"record {self.record.id!r}: LM {source} not available")
        return table[order]

    def seq_stats(self, source: str) -> SurprisalStats:
        if source not in self._seq_stats:
            model = self.lm_for(source)
            if source.startswith("pos_"):
                if self.record.pos is None:
                    raise InputError(
                        f"record {self.record.id!r}: POS tags required for {source} features")
                seq = list(self.record.pos)
            else:
                seq = self.surfaces
            self._seq_stats[source] = stats_from_values(model.sequence_surprisals(seq))
        return self._seq_stats[source]

    def word_surprisals(self, order: int) -> list[float]:
        """Title-LM surprisals at word positions only (no END step)."""
        if order not in self._word_surprisals:
            model = self.resources.title_lms.get(order)
            if model is None:
                raise InputError(f"record {self.record.id!r}: title {order}-gram LM missing")
            per_token = model.sequence_surprisals(self.surfaces, include_end=False)
            self._word_surprisals[order] = [per_token[i] for i in self.word_idx]
        return self._word_surprisals[order]

    def nouns(self) -> tuple[list[str], bool]:
        """Noun surfaces and whether the all-words fallback was used."""
        if self.record.pos is not None:
            return ([self.surfaces[i] for i in self.word_idx
                     if self.record.pos[i] in NOUN_TAGS], False)
        return (list(self.words), True)


def extract_features(record: TitleRecord, resources: Resources,
                     spec: FeatureSpec) -> FeatureVector:
    ctx = _RecordContext(record, resources)
    values = np.zeros(len(spec))
    mask = np.zeros(len(spec), dtype=bool)
    empty_title = not ctx.words

    aoa = resources.aoa
    funniness = resources.funniness
    aoa_stats = lookup_stats(aoa, ctx.words) if aoa else None
    nouns, noun_fallback = ctx.nouns() if funniness else ([], False)
    funny_stats = lookup_stats(funniness, nouns) if funniness else None

    for slot, desc in enumerate(spec.descriptors):
        family, source, stat = desc.family, desc.source, desc.stat
        if family == "unexpected" and source.startswith("external_"):
            tag = source[len("external_"):]
            table = resources.external.get(tag)
            if table is None:
                raise InputError(f"external score table {tag!r} not available")
            stats = table.stats(record.id)
            values[slot] = _stat_of(stats, stat)
            mask[slot] = stats.empty
        elif family == "unexpected":
            stats = ctx.seq_stats(source)
            values[slot] = _stat_of(stats, stat)
            mask[slot] = stats.empty
        elif source == "length":
            if desc.name == "title_word_count":
                values[slot] = float(len(ctx.words))
            else:
                lengths = [float(len(w)) for w in ctx.words]
                stats = stats_from_values(lengths)
                values[slot] = _stat_of(stats, stat)
            mask[slot] = empty_title
        elif desc.name == "ari":
            values[slot] = ari(ctx.words, ctx.sentences)
            mask[slot] = empty_title
        elif desc.name == "dale_chall":
            values[slot] = dale_chall(ctx.words, resources.familiar_words, ctx.sentences)
            mask[slot] = empty_title
        elif source == "aoa":
            if aoa_stats is None:
                raise InputError("age-of-acquisition table required by spec but not loaded")
            values[slot] = aoa_stats[stat if stat != "var" else "variance"]
            mask[slot] = aoa_stats["coverage"] == 0.0
        elif source == "nbsvm":
            if resources.crudeness is None:
                raise InputError("crudeness model required by feature spec but not loaded")
            # empty titles stay all-zero rather than surfacing the model bias
            values[slot] = 0.0 if empty_title else crudeness_prob(
                resources.crudeness, record.text)
            mask[slot] = empty_title
        elif "/aoa" in source:
            if aoa is None:
                raise InputError("age-of-acquisition table required by spec but not loaded")
            order = int(source.split("_")[1][0])
            denom = [aoa.value(w) if aoa.value(w) is not None else DEFAULT_AOA
                     for w in ctx.words]
            stats = combined_ratio_stats(ctx.word_surprisals(order), denom)
            values[slot] = _stat_of(stats, stat)
            mask[slot] = stats.empty
        elif "/benign" in source:
            if resources.crudeness is None:
                raise InputError("crudeness model required by feature spec but not loaded")
            order = int(source.split("_")[1][0])
            denom = [word_benign_prob(resources.crudeness, w) for w in ctx.words]
            stats = combined_ratio_stats(ctx.word_surprisals(order), denom)
            values[slot] = _stat_of(stats, stat)
            mask[slot] = stats.empty
        elif source == "funniness":
            if funny_stats is None:
                raise InputError("funniness table required by spec but not loaded")
            values[slot] = funny_stats[stat if stat != "var" else "variance"]
            mask[slot] = funny_stats["coverage"] == 0.0 or noun_fallback
        elif "*funniness" in source:
            if funniness is None:
                raise InputError("funniness table required by spec but not loaded")
            order = int(source.split("_")[1][0])
            vals = [funniness.value(w) if funniness.value(w) is not None
                    else DEFAULT_FUNNINESS for w in ctx.words]
            stats = combined_product_stats(ctx.word_surprisals(order), vals)
            values[slot] = _stat_of(stats, stat)
            mask[slot] = stats.empty
        else:
            raise InputError(f"feature {desc.name!r}: no extraction rule for source {source!r}")

    if not np.all(np.isfinite(values)):
        bad = spec.names()[int(np.argmin(np.isfinite(values)))]
        raise NumericError(f"record {record.id!r}: non-finite value for feature {bad!r}")
    return FeatureVector(title_id=record.id, values=values, missing_mask=mask)


_POOL_STATE: dict = {}


def _extract_indexed(args):
    idx, record = args
    try:
        fv = extract_features(record, _POOL_STATE["resources"], _POOL_STATE["spec"])
        return idx, fv, None
    except Exception as exc:  # reported with the record id by build_matrix
        return idx, None, f"{record.id}: {exc}"


def build_matrix(records: Sequence[TitleRecord], resources: Resources,
                 spec: FeatureSpec, threads: int = 1):
    """Extract features for every record; returns (matrix, ids, mask matrix).

    Row order equals input order regardless of worker scheduling.  Extraction
    errors are aggregated and raised together, naming the failing records.
    """
    n = len(records)
    matrix = np.zeros((n, len(spec)))
    masks = np.zeros((n, len(spec)), dtype=bool)
    ids = [rec.id for rec in records]
    errors: list[str] = []

    if threads <= 1 or n < 2:
        results = map(_extract_indexed_inline(resources, spec), enumerate(records))
    else:
        _POOL_STATE["resources"] = resources
        _POOL_STATE["spec"] = spec
        ctx = multiprocessing.get_context("fork")
        chunk = max(1, n // (threads * 4))
        with ctx.Pool(processes=threads) as pool:
            results = pool.map(_extract_indexed, enumerate(records), chunksize=chunk)

    for idx, fv, err in results:
        if err is not None:
            errors.append(err)
            continue
        matrix[idx] = fv.values
        masks[idx] = fv.missing_mask
    if errors:
        shown = "; ".join(errors[:5])
        more = f" (+{len(errors) - 5} more)" if len(errors) > 5 else ""
        raise InputError(f"feature extraction failed for {len(errors)} records: {shown}{more}")
    return matrix, ids, masks


def _extract_indexed_inline(resources, spec):
    def run(args):
        idx, record = args
        try:
            fv = extract_features(record, resources, spec)
            return idx, fv, None
        except Exception as exc:
            return idx, None, f"{record.id}: {exc}"
    return run


@dataclass
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # bool flags for zero-variance columns


def standardize(matrix: np.ndarray, stats: Optional[StandardizationStats] = None):
    """Z-score columns; constant columns pass through unscaled and are flagged."""
    X = np.asarray(matrix, dtype=float)
    if stats is None:
        mean = X.mean(axis=0) if len(X) else np.zeros(X.shape[1])
        std = X.std(axis=0) if len(X) else np.ones(X.shape[1])
        constant = std == 0.0
        stats = StandardizationStats(mean=mean, std=std, constant=constant)
    if X.shape[1] != stats.mean.shape[0]:
        raise InputError(
            f"matrix has {X.shape[1]} columns, standardization stats have "
            f"{stats.mean.shape[0]}")
    safe = np.where(stats.constant, 1.0, stats.std)
    shift = np.where(stats.constant, 0.0, stats.mean)
    return (X - shift) / safe, stats


def export_matrix_csv(path: str, ids: Sequence[str], matrix: np.ndarray,
                      spec: FeatureSpec) -> None:
    """CSV with an ``id`` column then spec-named columns; float repr round-trips."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + spec.names())
        for rid, row in zip(ids, matrix):
            writer.writerow([rid] + [repr(float(v)) for v in row])


def load_matrix_csv(path: str):
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot read feature matrix {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "id":
            raise InputError(f"{path}: feature CSV must start with an 'id' column")
        names = header[1:]
        ids, rows = [], []
        for row in reader:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    matrix = np.array(rows) if rows else np.zeros((0, len(names)))
    return ids, matrix, names
