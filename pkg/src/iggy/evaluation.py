"""Evaluation and statistics: classification metrics, cross-validation,
ranking metrics (NDCG, precision@k, top-k overlap), Spearman and Wilcoxon
tests, per-feature reports, and crowd-annotation aggregation with
decision-rule selection.
"""

from __future__ import annotations

import csv
import itertools
import math
import random
from dataclasses import dataclass, field as dc_field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.special import stdtr

from .corpus import TitleRecord, _stratum_key
from .errors import InputError


# ---------------------------------------------------------------------------
# Classification metrics


@dataclass(frozen=True)
class Report:
    accuracy: float
    precision: float
    recall: float
    degenerate: bool = False  # a zero-denominator metric was forced to 0


def classification_report(pred: Sequence[int], gold: Sequence[int]) -> Report:
    if len(pred) != len(gold):
        raise InputError(f"{len(pred)} predictions but {len(gold)} labels")
    if not pred:
        raise InputError("cannot score an empty prediction list")
    tp = sum(1 for p, g in zip(pred, gold) if p == 1 and g == 1)
    fp = sum(1 for p, g in zip(pred, gold) if p == 1 and g == 0)
    fn = sum(1 for p, g in zip(pred, gold) if p == 0 and g == 1)
    correct = sum(1 for p, g in zip(pred, gold) if p == g)
    degenerate = (tp + fp == 0) or (tp + fn == 0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return Report(accuracy=correct / len(pred), precision=precision,
                  recall=recall, degenerate=degenerate)


def stratified_folds(records: Sequence[TitleRecord], k_folds: int, seed: int) -> list[list[int]]:
    """Round-robin deal inside each (label, field) stratum; balanced within 1."""
    if k_folds < 2:
        raise InputError("need at least 2 folds")
    rng = random.Random(seed)
    strata: dict[tuple, list[int]] = {}
    for idx, rec in enumerate(records):
        strata.setdefault(_stratum_key(rec), []).append(idx)
    folds: list[list[int]] = [[] for _ in range(k_folds)]
    cursor = 0
    for key in sorted(strata):
        members = list(strata[key])
        rng.shuffle(members)
        for idx in members:
            folds[cursor % k_folds].append(idx)
            cursor += 1
    return [sorted(f) for f in folds]


def cross_validate(
    records: Sequence[TitleRecord],
    k_folds: int,
    trainer: Callable[[list[TitleRecord]], Callable[[list[TitleRecord]], Sequence[int]]],
    seed: int = 0,
) -> dict:
    """Stratified k-fold evaluation of a trainer.

    ``trainer(train_records)`` returns a predictor mapping records to binary
    labels.  Returns mean/std per metric plus the per-fold reports.
    """
    labels = [rec.label for rec in records]
    if any(lab is None for lab in labels):
        raise InputError("cross-validation needs labeled records")
    folds = stratified_folds(records, k_folds, seed)
    for i, fold in enumerate(folds):
        got = {records[idx].label for idx in fold}
        if got != {0, 1}:
            raise InputError(f"fold {i} lacks a class; provide more data or fewer folds")

    reports = []
    for i, fold in enumerate(folds):
        test = [records[idx] for idx in fold]
        train = [records[idx] for j, f in enumerate(folds) if j != i for idx in f]
        predictor = trainer(train)
        pred = list(predictor(test))
        reports.append(classification_report(pred, [rec.label for rec in test]))

    def agg(metric):
        values = [getattr(r, metric) for r in reports]
        return {"mean": float(np.mean(values)), "std": float(np.std(values))}

    return {"accuracy": agg("accuracy"), "precision": agg("precision"),
            "recall": agg("recall"), "folds": reports}


# ---------------------------------------------------------------------------
# Ranking metrics


@dataclass
class RankedList:
    """Title ids with scores, descending; ties ordered by ascending id."""

    ids: list[str]
    scores: list[float]

    def __post_init__(self):
        if len(self.ids) != len(set(self.ids)):
            raise InputError("ranked list contains duplicate ids")
        if any(a < b for a, b in zip(self.scores, self.scores[1:])):
            raise InputError("ranked list scores must be non-increasing")

    @classmethod
    def from_scores(cls, pairs: Iterable[tuple[str, float]]) -> "RankedList":
        ordered = sorted(pairs, key=lambda kv: (-kv[1], kv[0]))
        return cls(ids=[i for i, _ in ordered], scores=[s for _, s in ordered])

    def top(self, k: int) -> list[str]:
        return self.ids[:k]


def ndcg_at_k(ranked_relevance: Sequence[int], k: int) -> float:
    """Binary-gain NDCG with log2(rank+1) discount; all-zero relevance -> 0."""
    if k < 1:
        raise InputError("k must be at least 1")
    rel = list(ranked_relevance)

    def dcg(values):
        return sum(v / math.log2(i + 2) for i, v in enumerate(values[:k]))

    ideal = dcg(sorted(rel, reverse=True))
    if ideal == 0.0:
        return 0.0
    return dcg(rel) / ideal


def precision_at_k_curve(ranked_binary: Sequence[int], step: int = 10) -> list[tuple[int, float]]:
    """Running precision at k = step, 2*step, ..., n (n always included)."""
    if step < 1:
        raise InputError("step must be at least 1")
    rel = list(ranked_binary)
    if not rel:
        raise InputError("cannot compute precision over an empty ranking")
    ks = list(range(step, len(rel) + 1, step))
    if not ks or ks[-1] != len(rel):
        ks.append(len(rel))
    cumulative = np.cumsum(rel)
    return [(k, float(cumulative[k - 1] / k)) for k in ks]


def top_k_overlap(list_a: RankedList, list_b: RankedList, k: int) -> float:
    if k < 1:
        raise InputError("k must be at least 1")
    if k > min(len(list_a.ids), len(list_b.ids)):
        raise InputError(f"k={k} exceeds a ranking of length "
                         f"{min(len(list_a.ids), len(list_b.ids))}")
    return len(set(list_a.top(k)) & set(list_b.top(k))) / k


# ---------------------------------------------------------------------------
# Rank statistics


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n_effective: int
    method: str = ""
    degenerate: bool = False


def _ranks(values: Sequence[float]) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their mean rank."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr))
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float((xc * xc).sum()) * float((yc * yc).sum()))
    if denom == 0.0:
        return 0.0
    return float((xc * yc).sum()) / denom


def spearman(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Spearman rho via average ranks; exact permutation p below n=10,
    t-approximation otherwise.  Constant input is flagged, not an error."""
    if len(x) != len(y):
        raise InputError(f"{len(x)} vs {len(y)} observations")
    n = len(x)
    if n < 2:
        raise InputError("need at least 2 observations")
    if len(set(x)) == 1 or len(set(y)) == 1:
        return TestResult(0.0, 1.0, n, method="degenerate", degenerate=True)
    rx = _ranks(x)
    ry = _ranks(y)
    rho = _pearson(rx, ry)
    if n < 10:
        observed = abs(rho)
        count = 0
        total = 0
        for perm in itertools.permutations(range(n)):
            total += 1
            if abs(_pearson(rx, ry[list(perm)])) >= observed - 1e-12:
                count += 1
        return TestResult(rho, count / total, n, method="permutation")
    if abs(rho) >= 1.0:
        return TestResult(rho, 0.0, n, method="t-approx")
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(stdtr(n - 2, -abs(t)))
    return TestResult(rho, min(1.0, p), n, method="t-approx")


def _wilcoxon_prepare(a: Sequence[float], b: Sequence[float]):
    if len(a) != len(b):
        raise InputError(f"{len(a)} vs {len(b)} paired observations")
    diffs = [x - y for x, y in zip(a, b) if x != y]
    if not diffs:
        raise InputError("all paired differences are zero")
    ranks = _ranks([abs(d) for d in diffs])
    t_plus = float(sum(r for r, d in zip(ranks, diffs) if d > 0))
    t_minus = float(sum(r for r, d in zip(ranks, diffs) if d < 0))
    return diffs, ranks, t_plus, t_minus


def _wilcoxon_exact_p(ranks: np.ndarray, w: float) -> float:
    """P(T+ <= w or T+ >= S - w) under the null, by counting over doubled
    ranks (integers even with average-rank ties)."""
    doubled = [int(round(2 * r)) for r in ranks]
    total = sum(doubled)
    # distribution over achievable doubled sums
    dist = np.zeros(total + 1)
    dist[0] = 1.0
    for d in doubled:
        shifted = np.zeros_like(dist)
        shifted[d:] = dist[:len(dist) - d]
        dist = dist + shifted
    w2 = int(round(2 * w))
    low = dist[:w2 + 1].sum()
    high = dist[max(0, total - w2):].sum()
    overlap = 0.0
    if total - w2 <= w2:  # the two tails meet in the middle
        overlap = dist[max(0, total - w2):w2 + 1].sum()
    return float((low + high - overlap) / 2.0 ** len(doubled))


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float],
                         exact_threshold: int = 12) -> TestResult:
    """Two-sided signed-rank test; W is the smaller signed-rank sum.

    The p-value is exact (full sign-assignment distribution) for effective
    n up to ``exact_threshold``; beyond that a normal approximation with
    continuity correction and tie-corrected variance is used.
    """
    diffs, ranks, t_plus, t_minus = _wilcoxon_prepare(a, b)
    n = len(diffs)
    w = min(t_plus, t_minus)
    if n <= exact_threshold:
        return TestResult(w, _wilcoxon_exact_p(ranks, w), n, method="exact")
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, counts = np.unique(np.abs(np.asarray(diffs)), return_counts=True)
    var -= float(((counts**3 - counts) / 48.0).sum())
    if var <= 0:
        return TestResult(w, 1.0, n, method="normal", degenerate=True)
    z = (w - mu + 0.5) / math.sqrt(var)
    p = min(1.0, 2.0 * 0.5 * math.erfc(-z / math.sqrt(2.0)))
    return TestResult(w, p, n, method="normal")


def feature_report(matrix: np.ndarray, labels: Sequence[int],
                   names: Optional[Sequence[str]] = None,
                   seed: int = 0) -> list[tuple[str, TestResult]]:
    """Wilcoxon test per feature between class-1 and class-0 samples.

    Pairs are formed by index after a seeded shuffle inside each class, so
    reported statistics are reproducible but pairing-dependent.  Output is
    sorted ascending by p-value.
    """
    X = np.asarray(matrix, dtype=float)
    y = np.asarray(labels)
    if len(X) != len(y):
        raise InputError(f"{len(X)} rows but {len(y)} labels")
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if abs(len(pos) - len(neg)) > 1:
        raise InputError(
            f"classes unbalanced beyond one record: {len(pos)} vs {len(neg)}")
    rng = random.Random(seed)
    pos = list(pos); neg = list(neg)
    rng.shuffle(pos)
    rng.shuffle(neg)
    m = min(len(pos), len(neg))
    pos, neg = pos[:m], neg[:m]
    if names is None:
        names = [f"f{j}" for j in range(X.shape[1])]

    rows = []
    for j, name in enumerate(names):
        try:
            result = wilcoxon_signed_rank(X[pos, j].tolist(), X[neg, j].tolist())
        except InputError:
            result = TestResult(0.0, 1.0, 0, method="degenerate", degenerate=True)
        rows.append((name, result))
    rows.sort(key=lambda kv: (kv[1].p_value, kv[0]))
    return rows


def export_feature_report(rows: Sequence[tuple[str, TestResult]], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "statistic", "p_value", "n_effective", "method"])
        for name, res in rows:
            writer.writerow([name, repr(res.statistic), repr(res.p_value),
                             res.n_effective, res.method])


def model_correlation_matrix(score_tables: dict[str, dict[str, float]]):
    """Pairwise Spearman rho between model score tables over shared ids."""
    if len(score_tables) < 2:
        raise InputError("need at least two models to correlate")
    names = sorted(score_tables)
    id_sets = [set(score_tables[n]) for n in names]
    base = id_sets[0]
    if any(s != base for s in id_sets[1:]):
        raise InputError("model score tables cover different title ids")
    ids = sorted(base)
    vectors = {n: [score_tables[n][i] for i in ids] for n in names}
    size = len(names)
    matrix = np.eye(size)
    for i in range(size):
        for j in range(i + 1, size):
            rx = _ranks(vectors[names[i]])
            ry = _ranks(vectors[names[j]])
            rho = _pearson(rx, ry)
            matrix[i, j] = matrix[j, i] = rho
    return names, matrix


# ---------------------------------------------------------------------------
# Crowd annotations


@dataclass(frozen=True)
class DecisionRule:
    """Funny when at least k annotators rated at least m."""

    k: int
    m: int

    def __post_init__(self):
        if self.k < 1:
            raise InputError("decision rule k must be >= 1")
        if self.m not in (2, 3, 4, 5):
            raise InputError("decision rule m must lie in 2..5")


@dataclass
class AnnotationMatrix:
    """Per-title worker ratings for the title and topic questions."""

    ratings: dict[str, list[tuple[str, int, int]]] = dc_field(default_factory=dict)

    def add(self, title_id: str, worker_id: str, title_score: int, topic_score: int,
            where: str = "") -> None:
        for score in (title_score, topic_score):
            if score not in (1, 2, 3, 4, 5):
                raise InputError(f"{where or title_id}: score {score} outside 1..5")
        self.ratings.setdefault(title_id, []).append((worker_id, title_score, topic_score))

    def scores(self, title_id: str, question: str) -> list[int]:
        idx = {"title": 1, "topic": 2}.get(question)
        if idx is None:
            raise InputError(f"unknown question {question!r}")
        return [row[idx] for row in self.ratings[title_id]]


def load_annotations(path: str) -> AnnotationMatrix:
    """CSV header ``title_id,worker_id,title_score,topic_score``."""
    matrix = AnnotationMatrix()
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot read annotations {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        needed = {"title_id", "worker_id", "title_score", "topic_score"}
        if reader.fieldnames is None or set(reader.fieldnames) < needed:
            raise InputError(f"{path}: annotation CSV needs header {sorted(needed)}")
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            try:
                tscore = int(row["title_score"])
                cscore = int(row["topic_score"])
            except (TypeError, ValueError):
                raise InputError(f"{where}: scores must be integers") from None
            matrix.add(row["title_id"], row["worker_id"], tscore, cscore, where=where)
    if not matrix.ratings:
        raise InputError(f"{path}: no annotations found")
    return matrix


def aggregate_annotations(matrix: AnnotationMatrix, rule: DecisionRule,
                          question: str = "topic"):
    """Binary label per title: 1 iff at least rule.k ratings reach rule.m.

    Returns (labels, flagged) where flagged holds titles with fewer than
    rule.k ratings (they can never qualify).
    """
    labels: dict[str, int] = {}
    flagged: set[str] = set()
    for title_id in matrix.ratings:
        scores = matrix.scores(title_id, question)
        if len(scores) < rule.k:
            flagged.add(title_id)
        qualifying = sum(1 for s in scores if s >= rule.m)
        labels[title_id] = 1 if qualifying >= rule.k else 0
    return labels, flagged


def select_decision_rule(
    matrix: AnnotationMatrix,
    reference: dict[str, float],
    rule_grid: Sequence[DecisionRule],
    mode: str = "gold",
    question: str = "topic",
):
    """Score every rule against a reference and return the best one.

    ``mode='gold'`` scores accuracy against binary labels; ``mode='expert'``
    scores Spearman correlation of the aggregated labels with expert ratings.
    Ties keep the earliest rule in the grid.
    """
    if not rule_grid:
        raise InputError("decision-rule grid is empty")
    if mode not in ("gold", "expert"):
        raise InputError(f"unknown selection mode {mode!r}")
    shared = [tid for tid in sorted(matrix.ratings) if tid in reference]
    if not shared:
        raise InputError("reference does not cover any annotated title")

    table = []
    best = None
    best_score = -math.inf
    for rule in rule_grid:
        labels, _ = aggregate_annotations(matrix, rule, question)
        agg = [labels[tid] for tid in shared]
        ref = [reference[tid] for tid in shared]
        if mode == "gold":
            score = sum(1 for a, r in zip(agg, ref) if a == int(r)) / len(shared)
        else:
            score = spearman(agg, ref).statistic
        table.append((rule, score))
        if score > best_score:
            best, best_score = rule, score
    return best, table
