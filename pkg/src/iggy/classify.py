"""Trainable classifiers: the feature MLP, the frozen-embedding fusion model,
the bag-of-words logistic baseline, the threshold rule classifier, simple
one-score models, and the stacking ensemble.

Serialized models carry the hash of the feature spec they were trained
against; prediction helpers refuse a mismatched spec.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import corpus as corpus_mod
from .corpus import FIELD_NAMES, TitleRecord
from .errors import FormatVersionError, InputError
from .features import NOUN_TAGS, Resources, StandardizationStats, dale_chall, sentence_count
from .lexicons import (
    DEFAULT_AOA,
    DEFAULT_FUNNINESS,
    ConnotationLists,
    WordValueTable,
    connotation_flags,
)
from .lm import NGramModel
from .mlp import FusionNet, MlpConfig, MlpNet, TrainHistory, train_loop, _validate_xy
from .util import canonical_json

MLP_FORMAT = "IGGY-MLP-1"
FUSION_FORMAT = "IGGY-FUSION-1"
RULE_FORMAT = "IGGY-RULE-1"
ENSEMBLE_FORMAT = "IGGY-ENS-1"
BOW_FORMAT = "IGGY-BOW-1"

ONE_HOT_FIELDS = tuple(f for f in FIELD_NAMES if f != "unknown")


@dataclass
class MlpModel:
    net: MlpNet
    config: MlpConfig
    history: TrainHistory
    standardization: Optional[StandardizationStats] = None
    spec_hash: Optional[str] = None

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.standardization is not None:
            from .features import standardize
            X, _ = standardize(X, self.standardization)
        return self.net.predict_proba(X)[:, 1]


def train_mlp(X: np.ndarray, y: Sequence[int], config: Optional[MlpConfig] = None) -> MlpModel:
    """Train the feature classifier on an already standardized matrix."""
    config = config or MlpConfig()
    X, y = _validate_xy(X, y)
    sizes = [X.shape[1], *config.hidden, 2]
    net = MlpNet(sizes, seed=config.seed)
    history = train_loop(
        net, (X, y), config,
        loss_fn=lambda m, Xb, yb: m.loss(Xb, yb, l2=0.0),
        grad_fn=lambda m, Xb, yb: m.loss_and_grads(Xb, yb, l2=config.l2),
    )
    return MlpModel(net=net, config=config, history=history)


@dataclass
class FusionModel:
    net: FusionNet
    config: MlpConfig
    history: TrainHistory
    standardization: Optional[StandardizationStats] = None
    spec_hash: Optional[str] = None

    def predict_proba(self, X: np.ndarray, E: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.standardization is not None:
            from .features import standardize
            X, _ = standardize(X, self.standardization)
        return self.net.predict_proba(X, np.asarray(E, dtype=float))[:, 1]


def train_fusion(X: np.ndarray, E: np.ndarray, y: Sequence[int],
                 config: Optional[MlpConfig] = None,
                 branch_hidden: int = 512, branch_out: int = 512,
                 head_hidden: int = 1024) -> FusionModel:
    """Joint training of the feature branch and head; embeddings stay fixed."""
    config = config or MlpConfig()
    X, y = _validate_xy(X, y)
    E = np.asarray(E, dtype=float)
    if len(E) != len(X):
        raise InputError(f"{len(X)} feature rows but {len(E)} embedding rows")
    if not np.all(np.isfinite(E)):
        raise InputError("non-finite values in embedding matrix")
    net = FusionNet(X.shape[1], E.shape[1], seed=config.seed,
                    branch_hidden=branch_hidden, branch_out=branch_out,
                    head_hidden=head_hidden)
    history = train_loop(
        net, (X, E, y), config,
        loss_fn=lambda m, Xb, Eb, yb: m.loss(Xb, Eb, yb, l2=0.0),
        grad_fn=lambda m, Xb, Eb, yb: m.loss_and_grads(Xb, Eb, yb, l2=config.l2),
    )
    return FusionModel(net=net, config=config, history=history)


@dataclass
class LinearBowModel:
    vocabulary: dict[str, int]
    weights: np.ndarray
    bias: float
    spec_hash: Optional[str] = None

    def _features(self, text: str) -> list[int]:
        words = set(corpus_mod.words_of(corpus_mod.tokenize(text)))
        return [self.vocabulary[w] for w in words if w in self.vocabulary]

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        scores = np.full(len(texts), self.bias)
        for row, text in enumerate(texts):
            for idx in self._features(text):
                scores[row] += self.weights[idx]
        return 1.0 / (1.0 + np.exp(-scores))


def train_logreg_bow(texts: Sequence[str], y: Sequence[int], l2: float = 1e-3,
                     iterations: int = 800, lr: float = 0.1) -> LinearBowModel:
    """L2 logistic regression on binarized unigram presence features."""
    labels = np.asarray(y, dtype=float)
    if len(set(labels.tolist())) < 2:
        raise InputError("bag-of-words training needs both classes")
    word_sets = [set(corpus_mod.words_of(corpus_mod.tokenize(t))) for t in texts]
    vocabulary = {w: i for i, w in enumerate(sorted(set().union(*word_sets)))}
    if not vocabulary:
        raise InputError("no vocabulary left after tokenization")

    X = np.zeros((len(texts), len(vocabulary)), dtype=np.float32)
    for row, words in enumerate(word_sets):
        for w in words:
            X[row, vocabulary[w]] = 1.0

    # Convex objective with zero init: deterministic without a seed.
    w = np.zeros(len(vocabulary))
    bias = 0.0
    m_w = np.zeros_like(w); v_w = np.zeros_like(w)
    m_b = v_b = 0.0
    b1, b2, eps = 0.9, 0.999, 1e-8
    n = len(texts)
    for step in range(1, iterations + 1):
        probs = 1.0 / (1.0 + np.exp(-(X @ w + bias)))
        err = probs - labels
        gw = X.T @ err / n + l2 * w
        gb = float(err.mean())
        m_w = b1 * m_w + (1 - b1) * gw
        v_w = b2 * v_w + (1 - b2) * gw * gw
        m_b = b1 * m_b + (1 - b1) * gb
        v_b = b2 * v_b + (1 - b2) * gb * gb
        scale = math.sqrt(1 - b2**step) / (1 - b1**step)
        w -= lr * scale * m_w / (np.sqrt(v_w) + eps)
        bias -= lr * scale * m_b / (math.sqrt(v_b) + eps)
    return LinearBowModel(vocabulary=vocabulary, weights=w, bias=float(bias))


def predict_proba(model, X, embeddings: Optional[np.ndarray] = None) -> np.ndarray:
    """Class-1 probabilities for any trained classifier.

    ``X`` is the model's natural input: a feature matrix for MLP models,
    (matrix, embeddings) for fusion models, raw texts for the BoW baseline.
    """
    if isinstance(model, FusionModel):
        if embeddings is None:
            raise InputError("fusion model prediction needs embeddings")
        return model.predict_proba(X, embeddings)
    if isinstance(model, (MlpModel, LinearBowModel)):
        return model.predict_proba(X)
    raise InputError(f"cannot predict with {type(model).__name__}")


# ---------------------------------------------------------------------------
# Rule classifier


@dataclass(frozen=True)
class RuleThresholds:
    aoa_low: float
    funniness_high: float
    surprisal_field_high: float
    surprisal_global_high: float


@dataclass
class RuleResources:
    aoa: WordValueTable
    funniness: WordValueTable
    field_lms: dict[str, NGramModel]
    global_lm: NGramModel
    connotations: ConnotationLists


@dataclass
class RuleInputs:
    has_white: bool
    has_black: bool
    noun_aoa: list[float]
    noun_funniness: list[float]
    noun_surprisal_field: list[float]
    noun_surprisal_global: list[float]


@dataclass
class RuleClassifier:
    per_field: dict[str, RuleThresholds]
    fallback: RuleThresholds


def build_rule_inputs(record: TitleRecord, res: RuleResources) -> RuleInputs:
    """Per-noun values the rule needs; POS-less records fall back to all words."""
    record.ensure_tokens()
    if record.pos is not None:
        nouns = [t.surface for t, tag in zip(record.tokens, record.pos)
                 if t.is_word and tag in NOUN_TAGS]
    else:
        nouns = record.words()
    flags = connotation_flags(res.connotations, record.words())
    field_lm = res.field_lms.get(record.field, res.global_lm)
    return RuleInputs(
        has_white=flags["has_white"],
        has_black=flags["has_black"],
        noun_aoa=[res.aoa.value(w) if res.aoa.value(w) is not None else DEFAULT_AOA
                  for w in nouns],
        noun_funniness=[res.funniness.value(w) if res.funniness.value(w) is not None
                        else DEFAULT_FUNNINESS for w in nouns],
        noun_surprisal_field=[field_lm.surprisal((), w) for w in nouns],
        noun_surprisal_global=[res.global_lm.surprisal((), w) for w in nouns],
    )


def rule_classify(thresholds: RuleThresholds, inputs: RuleInputs) -> int:
    """Funny iff whitelisted-without-blacklist, or some noun is easy to acquire
    and either notably funny or notably surprising."""
    if inputs.has_white and not inputs.has_black:
        return 1
    for aoa, funny, s_field, s_global in zip(
            inputs.noun_aoa, inputs.noun_funniness,
            inputs.noun_surprisal_field, inputs.noun_surprisal_global):
        if aoa < thresholds.aoa_low and (
                funny > thresholds.funniness_high
                or s_field > thresholds.surprisal_field_high
                or s_global > thresholds.surprisal_global_high):
            return 1
    return 0


def classify_with_rules(rc: RuleClassifier, inputs: RuleInputs, field: str) -> int:
    return rule_classify(rc.per_field.get(field, rc.fallback), inputs)


def _grid_cells(grid: dict[str, Sequence[float]]):
    for key in ("aoa_low", "funniness_high", "surprisal_field_high", "surprisal_global_high"):
        if not grid.get(key):
            raise InputError(f"rule threshold grid is missing candidates for {key!r}")
    return [
        RuleThresholds(*cell) for cell in itertools.product(
            grid["aoa_low"], grid["funniness_high"],
            grid["surprisal_field_high"], grid["surprisal_global_high"])
    ]


def _best_cell(cells, inputs, labels):
    best = None
    best_key = None
    for cell in cells:
        acc = sum(1 for inp, lab in zip(inputs, labels)
                  if rule_classify(cell, inp) == lab) / len(labels)
        # Prefer accuracy, then the strictest cell: lowest aoa_low, then the
        # lowest surprisal thresholds, then lowest funniness threshold.
        key = (-acc, cell.aoa_low, cell.surprisal_field_high,
               cell.surprisal_global_high, cell.funniness_high)
        if best_key is None or key < best_key:
            best, best_key = cell, key
    return best, -best_key[0]


def fit_rule_thresholds(
    records: Sequence[TitleRecord],
    labels: Sequence[int],
    grid: dict[str, Sequence[float]],
    resources: RuleResources,
):
    """Exhaustive grid search per field, optimizing accuracy.

    Returns (RuleClassifier, table) where table maps field name to
    (best accuracy, record count).  A fallback threshold set fit on all
    records covers fields unseen at fit time.
    """
    if len(records) != len(labels):
        raise InputError("records and labels differ in length")
    if not records:
        raise InputError("cannot fit rule thresholds without records")
    cells = _grid_cells(grid)
    inputs = [build_rule_inputs(rec, resources) for rec in records]

    per_field: dict[str, RuleThresholds] = {}
    table: dict[str, tuple[float, int]] = {}
    fields = sorted({rec.field for rec in records})
    for fieldname in fields:
        rows = [i for i, rec in enumerate(records) if rec.field == fieldname]
        cell, acc = _best_cell(cells, [inputs[i] for i in rows],
                               [labels[i] for i in rows])
        per_field[fieldname] = cell
        table[fieldname] = (acc, len(rows))
    fallback, fallback_acc = _best_cell(cells, inputs, list(labels))
    table["__all__"] = (fallback_acc, len(records))
    return RuleClassifier(per_field=per_field, fallback=fallback), table


# ---------------------------------------------------------------------------
# Simple one-score models


@dataclass(frozen=True)
class SimpleScore:
    value: float
    flagged: bool = False


def simple_score(kind: str, record: TitleRecord, resources: Resources) -> SimpleScore:
    """``max_noun_funniness`` or ``dale_chall_inverse`` (higher = funnier)."""
    record.ensure_tokens()
    if kind == "max_noun_funniness":
        if resources.funniness is None:
            raise InputError("funniness table not loaded")
        if record.pos is not None:
            nouns = [t.surface for t, tag in zip(record.tokens, record.pos)
                     if t.is_word and tag in NOUN_TAGS]
        else:
            nouns = record.words()
        values = [resources.funniness.entries[w] for w in nouns
                  if w in resources.funniness.entries]
        if not values:
            return SimpleScore(0.0, flagged=True)
        return SimpleScore(max(values))
    if kind == "dale_chall_inverse":
        words = record.words()
        score = dale_chall(words, resources.familiar_words, sentence_count(record.tokens))
        return SimpleScore(-score, flagged=not words)
    raise InputError(f"unknown simple score kind {kind!r}")


# ---------------------------------------------------------------------------
# Stacking ensemble


@dataclass
class EnsembleModel:
    meta: MlpModel
    base_tags: list[str]
    meta_feature_names: list[str]

    def input_width(self) -> int:
        return len(self.base_tags) + len(ONE_HOT_FIELDS) + len(self.meta_feature_names)


def field_one_hot(fields: Sequence[str]) -> np.ndarray:
    out = np.zeros((len(fields), len(ONE_HOT_FIELDS)))
    for row, f in enumerate(fields):
        if f in ONE_HOT_FIELDS:
            out[row, ONE_HOT_FIELDS.index(f)] = 1.0
    return out


def _ensemble_input(base_scores: np.ndarray, fields: Sequence[str],
                    meta_features: Optional[np.ndarray]) -> np.ndarray:
    base = np.asarray(base_scores, dtype=float)
    if base.ndim != 2:
        raise InputError("base scores must be a (models x titles) matrix")
    n_titles = base.shape[1]
    if len(fields) != n_titles:
        raise InputError(f"{n_titles} titles in base scores but {len(fields)} fields")
    parts = [base.T, field_one_hot(fields)]
    if meta_features is not None:
        meta = np.asarray(meta_features, dtype=float)
        if len(meta) != n_titles:
            raise InputError(f"{n_titles} titles but {len(meta)} meta-feature rows")
        parts.append(meta)
    return np.hstack(parts)


def train_stacking_ensemble(
    base_scores: np.ndarray,
    fields: Sequence[str],
    meta_features: Optional[np.ndarray],
    y: Sequence[int],
    base_tags: Sequence[str],
    meta_feature_names: Sequence[str] = (),
    config: Optional[MlpConfig] = None,
) -> EnsembleModel:
    """Meta-MLP over base-model scores, field one-hot, and meta features.

    Base scores must come from a split the base models never saw.  Passing
    ``meta_features=None`` gives the reduced variant (scores + field only).
    """
    base = np.asarray(base_scores, dtype=float)
    if base.shape[0] != len(base_tags):
        raise InputError(f"{base.shape[0]} score rows but {len(base_tags)} base tags")
    X = _ensemble_input(base, fields, meta_features)
    if len(X) != len(y):
        raise InputError(f"{len(X)} stacked rows but {len(y)} labels")
    meta_model = train_mlp(X, y, config or MlpConfig())
    return EnsembleModel(meta=meta_model, base_tags=list(base_tags),
                         meta_feature_names=list(meta_feature_names))


def ensemble_predict(model: EnsembleModel, base_scores: np.ndarray,
                     fields: Sequence[str],
                     meta_features: Optional[np.ndarray]) -> np.ndarray:
    X = _ensemble_input(base_scores, fields, meta_features)
    if X.shape[1] != model.input_width():
        raise InputError(
            f"ensemble input width {X.shape[1]} != expected {model.input_width()}")
    return model.meta.predict_proba(X)


def ensemble_meta_features(records: Sequence[TitleRecord],
                           resources: Resources) -> tuple[np.ndarray, list[str]]:
    """Default side features: word count, AoA mean, Dale-Chall, punctuation
    flag; valence mean/max appended when a valence table is loaded."""
    from .lexicons import lookup_stats

    names = ["title_word_count", "aoa_mean", "dale_chall", "has_punctuation"]
    if resources.valence is not None:
        names += ["valence_mean", "valence_max"]
    rows = []
    for rec in records:
        rec.ensure_tokens()
        words = rec.words()
        aoa_mean = lookup_stats(resources.aoa, words)["mean"] if resources.aoa else 0.0
        row = [
            float(len(words)),
            aoa_mean,
            dale_chall(words, resources.familiar_words, sentence_count(rec.tokens)),
            1.0 if any(not t.is_word for t in rec.tokens) else 0.0,
        ]
        if resources.valence is not None:
            vstats = lookup_stats(resources.valence, words)
            row += [vstats["mean"], vstats["max"]]
        rows.append(row)
    return np.array(rows), names


# ---------------------------------------------------------------------------
# Serialization

def _stats_payload(stats: Optional[StandardizationStats]):
    if stats is None:
        return None
    return {"mean": stats.mean.tolist(), "std": stats.std.tolist(),
            "constant": stats.constant.astype(int).tolist()}


def _stats_from_payload(payload) -> Optional[StandardizationStats]:
    if payload is None:
        return None
    return StandardizationStats(
        mean=np.array(payload["mean"]),
        std=np.array(payload["std"]),
        constant=np.array(payload["constant"], dtype=bool),
    )


def _config_payload(config: MlpConfig) -> dict:
    return {
        "hidden": list(config.hidden), "lr": config.lr, "l2": config.l2,
        "max_epochs": config.max_epochs, "patience": config.patience,
        "seed": config.seed, "batch_size": config.batch_size,
        "val_fraction": config.val_fraction,
    }


def _config_from_payload(payload: dict) -> MlpConfig:
    payload = dict(payload)
    payload["hidden"] = tuple(payload["hidden"])
    return MlpConfig(**payload)


def save_model(model, path: str) -> None:
    if isinstance(model, MlpModel):
        payload = {
            "format": MLP_FORMAT,
            "sizes": model.net.sizes,
            "weights": [W.tolist() for W in model.net.stack.W],
            "biases": [b.tolist() for b in model.net.stack.b],
            "config": _config_payload(model.config),
            "standardization": _stats_payload(model.standardization),
            "spec_hash": model.spec_hash,
        }
    elif isinstance(model, FusionModel):
        payload = {
            "format": FUSION_FORMAT,
            "n_features": model.net.n_features,
            "embed_dim": model.net.embed_dim,
            "branch_sizes": model.net.branch.sizes,
            "head_sizes": model.net.head.sizes,
            "branch_weights": [W.tolist() for W in model.net.branch.W],
            "branch_biases": [b.tolist() for b in model.net.branch.b],
            "head_weights": [W.tolist() for W in model.net.head.W],
            "head_biases": [b.tolist() for b in model.net.head.b],
            "config": _config_payload(model.config),
            "standardization": _stats_payload(model.standardization),
            "spec_hash": model.spec_hash,
        }
    elif isinstance(model, RuleClassifier):
        payload = {
            "format": RULE_FORMAT,
            "per_field": {f: vars(t) for f, t in sorted(model.per_field.items())},
            "fallback": vars(model.fallback),
        }
    elif isinstance(model, EnsembleModel):
        payload = {
            "format": ENSEMBLE_FORMAT,
            "base_tags": model.base_tags,
            "meta_feature_names": model.meta_feature_names,
            "meta": {
                "sizes": model.meta.net.sizes,
                "weights": [W.tolist() for W in model.meta.net.stack.W],
                "biases": [b.tolist() for b in model.meta.net.stack.b],
                "config": _config_payload(model.meta.config),
                "standardization": _stats_payload(model.meta.standardization),
            },
        }
    elif isinstance(model, LinearBowModel):
        payload = {
            "format": BOW_FORMAT,
            "vocabulary": model.vocabulary,
            "weights": model.weights.tolist(),
            "bias": model.bias,
            "spec_hash": model.spec_hash,
        }
    else:
        raise InputError(f"cannot serialize {type(model).__name__}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(payload))


def _mlp_from_payload(payload: dict) -> MlpModel:
    config = _config_from_payload(payload["config"])
    net = MlpNet(payload["sizes"], seed=config.seed)
    net.stack.W = [np.array(W) for W in payload["weights"]]
    net.stack.b = [np.array(b) for b in payload["biases"]]
    return MlpModel(net=net, config=config, history=TrainHistory(),
                    standardization=_stats_from_payload(payload.get("standardization")),
                    spec_hash=payload.get("spec_hash"))


def load_classifier(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot load model {path}: {exc}") from None
    fmt = payload.get("format")
    if fmt == MLP_FORMAT:
        return _mlp_from_payload(payload)
    if fmt == FUSION_FORMAT:
        config = _config_from_payload(payload["config"])
        net = FusionNet(payload["n_features"], payload["embed_dim"], seed=config.seed,
                        branch_hidden=payload["branch_sizes"][1],
                        branch_out=payload["branch_sizes"][2],
                        head_hidden=payload["head_sizes"][1])
        net.branch.W = [np.array(W) for W in payload["branch_weights"]]
        net.branch.b = [np.array(b) for b in payload["branch_biases"]]
        net.head.W = [np.array(W) for W in payload["head_weights"]]
        net.head.b = [np.array(b) for b in payload["head_biases"]]
        return FusionModel(net=net, config=config, history=TrainHistory(),
                           standardization=_stats_from_payload(payload.get("standardization")),
                           spec_hash=payload.get("spec_hash"))
    if fmt == RULE_FORMAT:
        return RuleClassifier(
            per_field={f: RuleThresholds(**t) for f, t in payload["per_field"].items()},
            fallback=RuleThresholds(**payload["fallback"]),
        )
    if fmt == ENSEMBLE_FORMAT:
        meta = _mlp_from_payload(payload["meta"])
        return EnsembleModel(meta=meta, base_tags=list(payload["base_tags"]),
                             meta_feature_names=list(payload["meta_feature_names"]))
    if fmt == BOW_FORMAT:
        return LinearBowModel(
            vocabulary={k: int(v) for k, v in payload["vocabulary"].items()},
            weights=np.array(payload["weights"]),
            bias=float(payload["bias"]),
            spec_hash=payload.get("spec_hash"),
        )
    raise FormatVersionError(f"{path}: unknown model format {fmt!r}")


def check_spec_hash(model, spec_hash: str) -> None:
    stored = getattr(model, "spec_hash", None)
    if stored is not None and stored != spec_hash:
        raise InputError(
            "model was trained against a different feature spec "
            f"(model {stored[:12]}..., current {spec_hash[:12]}...)")
