"""Command-line entry point.

Commands: ``iggy build-lm | extract | train | rank | evaluate | aggregate |
report``.  Every command reads an optional TOML config plus ``--section.key
value`` overrides, validates its inputs before doing any work, and writes its
artifacts plus a manifest.json under ``--out``.

Exit codes: 0 success, 2 input/config error, 3 runtime numeric error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import classify, evaluation, features, lexicons, lm, plots, postag
from .config import PipelineConfig, load_config
from .corpus import SplitSpec, TitleRecord, assign_fields, load_corpus, load_venue_map, \
    make_ig_retrieval_split, split_dataset
from .errors import ConfigError, IggyError, InputError
from .manifest import RunManifest
from .mlp import MlpConfig

log = logging.getLogger("iggy")

LM_GROUPS = ("title", "jokes", "pos")


# ---------------------------------------------------------------------------
# Shared plumbing


def _new_manifest(command: str, config: PipelineConfig, seed: Optional[int] = None) -> RunManifest:
    return RunManifest(command=command, config_hash=config.hash(), seed=seed)


def _finish(manifest: RunManifest, out_dir: str, artifact_paths: Sequence[str]) -> None:
    for path in artifact_paths:
        manifest.add_artifact(out_dir, path)
    manifest.write(out_dir)
    log.info("wrote %d artifacts to %s", len(artifact_paths), out_dir)


def _load_labeled_corpus(config: PipelineConfig) -> list[TitleRecord]:
    records = load_corpus(config.path("corpus"), format=_corpus_format(config.path("corpus")))
    if config.path("venue_map"):
        records = assign_fields(records, load_venue_map(config.path("venue_map")))
    return records


def _corpus_format(path: str) -> str:
    if path.endswith(".jsonl"):
        return "jsonl"
    if path.endswith(".tsv"):
        return "tsv"
    return "plain_lines"


def _lm_path(out_dir: str, group: str, order: int) -> str:
    return os.path.join(out_dir, f"lm_{group}_{order}gram.json")


def _load_lms(lm_dir: str, group: str) -> dict[int, lm.NGramModel]:
    models = {}
    for order in (1, 2, 3):
        path = _lm_path(lm_dir, group, order)
        if os.path.exists(path):
            models[order] = lm.load_model(path)
    return models


def _tag_records(records: Sequence[TitleRecord], tagger: postag.PosTaggerModel) -> None:
    for rec in records:
        if rec.pos is None:
            rec.pos = postag.pos_tag(tagger, rec.ensure_tokens())


def build_resources(config: PipelineConfig, need_external: bool = True) -> features.Resources:
    """Assemble the extraction resources named in the config.

    Fails fast if paths.lm_dir is missing; optional lexicons are loaded when
    their paths are set.  Records must be tagged separately when POS LMs or
    noun features are in play.
    """
    lm_dir = config.path("lm_dir")
    if not lm_dir or not os.path.isdir(lm_dir):
        raise ConfigError("paths.lm_dir must point at a build-lm output directory")
    res = features.Resources(
        title_lms=_load_lms(lm_dir, "title"),
        jokes_lms=_load_lms(lm_dir, "jokes"),
        pos_lms=_load_lms(lm_dir, "pos"),
    )
    if config.path("aoa"):
        res.aoa = lexicons.load_word_table(config.path("aoa"), "aoa")
    if config.path("funniness"):
        res.funniness = lexicons.load_word_table(config.path("funniness"), "funniness")
    if config.path("valence"):
        res.valence = lexicons.load_word_table(config.path("valence"), "valence")
    if config.path("familiar_words"):
        res.familiar_words = lexicons.load_word_list(config.path("familiar_words"))
    if config.path("whitelist") and config.path("blacklist"):
        res.connotations = lexicons.ConnotationLists(
            whitelist=lexicons.load_word_list(config.path("whitelist")),
            blacklist=lexicons.load_word_list(config.path("blacklist")),
        )
    if config.path("crude_train"):
        docs = lexicons.load_crudeness_csv(config.path("crude_train"))
        nb = config.section("nbsvm")
        res.crudeness = lexicons.train_nbsvm(docs, beta=nb["beta"], l2=nb["l2"])
    if need_external:
        for path in config.path("external_scores"):
            table = lm.import_external_scores(path)
            res.external[table.model_tag] = table
    return res


def _tagger_path(lm_dir: str) -> str:
    return os.path.join(lm_dir, "tagger.json")


def _maybe_tag(config: PipelineConfig, records: Sequence[TitleRecord],
               res: features.Resources) -> None:
    """Tag records whenever a tagger artifact is available; required for POS
    LM features and noun-based funniness."""
    lm_dir = config.path("lm_dir")
    path = _tagger_path(lm_dir) if lm_dir else ""
    if path and os.path.exists(path):
        _tag_records(records, postag.load_tagger(path))
    elif res.pos_lms:
        raise ConfigError(
            f"POS LMs found in {lm_dir} but no tagger.json; rerun build-lm")


def _mlp_config(config: PipelineConfig) -> MlpConfig:
    c = config.section("mlp")
    return MlpConfig(hidden=(c["hidden"],), lr=c["lr"], l2=c["l2"],
                     max_epochs=c["max_epochs"], patience=c["patience"],
                     seed=c["seed"])


def _labels_of(records: Sequence[TitleRecord]) -> np.ndarray:
    missing = [rec.id for rec in records if rec.label is None]
    if missing:
        raise InputError(f"{len(missing)} records lack labels "
                         f"(first: {missing[:3]})")
    return np.array([rec.label for rec in records], dtype=int)


# ---------------------------------------------------------------------------
# build-lm


def cmd_build_lm(config: PipelineConfig, out_dir: str) -> None:
    titles_path = config.path("titles_corpus") or config.path("corpus")
    if not titles_path:
        raise ConfigError("paths.titles_corpus (or paths.corpus) is required by 'build-lm'")
    if not os.path.exists(titles_path):
        raise ConfigError(f"paths.titles_corpus: {titles_path} does not exist")

    manifest = _new_manifest("build-lm", config, seed=config.section("tagger")["seed"])
    manifest.add_input(titles_path)
    lm_cfg = config.section("lm")
    orders = lm_cfg["orders"]
    artifacts = []

    records = load_corpus(titles_path, format=_corpus_format(titles_path))
    sequences = [[t.surface for t in rec.ensure_tokens()] for rec in records]
    started = time.time()
    for order in orders:
        model = lm.train_ngram(sequences, n=order, smoothing_k=lm_cfg["smoothing_k"],
                               min_count=lm_cfg["min_count"], source_tag="title")
        path = _lm_path(out_dir, "title", order)
        lm.serialize_model(model, path)
        artifacts.append(path)
    rate = len(records) * len(orders) / max(1e-9, time.time() - started)
    log.info("trained %d title LMs over %d titles (%.0f titles/s)",
             len(orders), len(records), rate)

    if config.path("jokes_corpus"):
        config.require_paths(["jokes_corpus"], "build-lm")
        manifest.add_input(config.path("jokes_corpus"))
        jokes = load_corpus(config.path("jokes_corpus"), format="plain_lines")
        joke_seqs = [[t.surface for t in rec.ensure_tokens()] for rec in jokes]
        for order in orders:
            model = lm.train_ngram(joke_seqs, n=order, smoothing_k=lm_cfg["smoothing_k"],
                                   min_count=lm_cfg["min_count"], source_tag="jokes")
            path = _lm_path(out_dir, "jokes", order)
            lm.serialize_model(model, path)
            artifacts.append(path)
        log.info("trained %d joke LMs over %d lines", len(orders), len(jokes))

    if config.path("pos_tagged"):
        config.require_paths(["pos_tagged"], "build-lm")
        manifest.add_input(config.path("pos_tagged"))
        tagged = postag.read_tagged_corpus(config.path("pos_tagged"))
        tagger_cfg = config.section("tagger")
        tagger = postag.train_pos_tagger(tagged, epochs=tagger_cfg["epochs"],
                                         seed=tagger_cfg["seed"])
        log.info("tagger held-out accuracy: %s", tagger.heldout_accuracy)
        tagger_file = _tagger_path(out_dir)
        postag.save_tagger(tagger, tagger_file)
        artifacts.append(tagger_file)
        tag_seqs = [postag.pos_tag(tagger, seq) for seq in sequences]
        for order in orders:
            model = lm.train_ngram(tag_seqs, n=order, smoothing_k=lm_cfg["smoothing_k"],
                                   min_count=1, source_tag="pos")
            path = _lm_path(out_dir, "pos", order)
            lm.serialize_model(model, path)
            artifacts.append(path)
        log.info("trained %d POS LMs", len(orders))

    _finish(manifest, out_dir, artifacts)


# ---------------------------------------------------------------------------
# extract


def cmd_extract(config: PipelineConfig, out_dir: str) -> None:
    config.require_paths(["corpus", "lm_dir"], "extract")
    manifest = _new_manifest("extract", config)
    manifest.add_input(config.path("corpus"))

    records = _load_labeled_corpus(config)
    res = build_resources(config)
    _maybe_tag(config, records, res)
    spec = features.default_feature_spec(res)
    log.info("feature registry: %d features", len(spec))

    started = time.time()
    matrix, ids, _ = features.build_matrix(records, res, spec,
                                           threads=config.threads())
    log.info("extracted %d rows in %.2fs", len(ids), time.time() - started)

    spec_path = os.path.join(out_dir, "feature_spec.json")
    spec.save(spec_path)
    csv_path = os.path.join(out_dir, "features.csv")
    features.export_matrix_csv(csv_path, ids, matrix, spec)
    _finish(manifest, out_dir, [spec_path, csv_path])


# ---------------------------------------------------------------------------
# train


def _load_features_for(config: PipelineConfig, records: Sequence[TitleRecord]):
    """Feature matrix + spec aligned to the given records, from the extract
    artifacts when configured, otherwise computed on the fly."""
    if config.path("features_csv") and config.path("feature_spec"):
        config.require_paths(["features_csv", "feature_spec"], "train")
        ids, matrix, names = features.load_matrix_csv(config.path("features_csv"))
        spec = features.FeatureSpec.load(config.path("feature_spec"))
        if names != spec.names():
            raise InputError("feature CSV columns do not match the feature spec")
        by_id = {rid: row for rid, row in zip(ids, matrix)}
        missing = [rec.id for rec in records if rec.id not in by_id]
        if missing:
            raise InputError(f"feature CSV lacks rows for {missing[:3]} "
                             f"(+{max(0, len(missing) - 3)} more)")
        return np.array([by_id[rec.id] for rec in records]), spec, None
    res = build_resources(config)
    _maybe_tag(config, records, res)
    spec = features.default_feature_spec(res)
    matrix, _, _ = features.build_matrix(records, res, spec, threads=config.threads())
    return matrix, spec, res


def _train_iggy(config: PipelineConfig, records, matrix, spec) -> classify.MlpModel:
    labels = _labels_of(records)
    do_std = config.section("mlp")["standardize"]
    if do_std:
        X, stats = features.standardize(matrix)
    else:
        X, stats = np.asarray(matrix, dtype=float), None
    model = classify.train_mlp(X, labels, _mlp_config(config))
    model.standardization = stats
    model.spec_hash = spec.spec_hash()
    return model


def _cv_trainer_iggy(config: PipelineConfig, res_matrix: dict):
    """Trainer closure for cross_validate over records with cached features."""
    def trainer(train_records):
        X = np.array([res_matrix[rec.id] for rec in train_records])
        y = np.array([rec.label for rec in train_records], dtype=int)
        Xs, stats = features.standardize(X)
        model = classify.train_mlp(Xs, y, _mlp_config(config))

        def predictor(test_records):
            Xt = np.array([res_matrix[rec.id] for rec in test_records])
            Xt, _ = features.standardize(Xt, stats)
            return (model.net.predict_proba(Xt)[:, 1] >= 0.5).astype(int)
        return predictor
    return trainer


def _cv_trainer_bow(config: PipelineConfig):
    def trainer(train_records):
        model = classify.train_logreg_bow([rec.text for rec in train_records],
                                          [rec.label for rec in train_records],
                                          l2=config.section("bow")["l2"])

        def predictor(test_records):
            probs = model.predict_proba([rec.text for rec in test_records])
            return (probs >= 0.5).astype(int)
        return predictor
    return trainer


def _write_cv_report(path: str, rows: dict[str, dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "accuracy_mean", "accuracy_std",
                         "precision_mean", "precision_std",
                         "recall_mean", "recall_std"])
        for name in sorted(rows):
            rep = rows[name]
            writer.writerow([name,
                             repr(rep["accuracy"]["mean"]), repr(rep["accuracy"]["std"]),
                             repr(rep["precision"]["mean"]), repr(rep["precision"]["std"]),
                             repr(rep["recall"]["mean"]), repr(rep["recall"]["std"])])


def _rule_resources(config: PipelineConfig, records) -> classify.RuleResources:
    for key in ("aoa", "funniness", "whitelist", "blacklist"):
        if not config.path(key):
            raise ConfigError(f"paths.{key} is required to train the rule classifier")
    config.require_paths(["aoa", "funniness", "whitelist", "blacklist"], "train rule")
    aoa = lexicons.load_word_table(config.path("aoa"), "aoa")
    funniness = lexicons.load_word_table(config.path("funniness"), "funniness")
    lists = lexicons.ConnotationLists(
        whitelist=lexicons.load_word_list(config.path("whitelist")),
        blacklist=lexicons.load_word_list(config.path("blacklist")),
    )
    lm_cfg = config.section("lm")
    negatives = [rec for rec in records if rec.label == 0] or list(records)
    global_lm = lm.train_ngram([rec.words() for rec in negatives], n=1,
                               smoothing_k=lm_cfg["smoothing_k"],
                               min_count=lm_cfg["min_count"], source_tag="global")
    field_lms = {}
    for fieldname in sorted({rec.field for rec in negatives}):
        field_records = [rec.words() for rec in negatives if rec.field == fieldname]
        if field_records:
            field_lms[fieldname] = lm.train_ngram(
                field_records, n=1, smoothing_k=lm_cfg["smoothing_k"],
                min_count=1, source_tag=f"field:{fieldname}")
    return classify.RuleResources(aoa=aoa, funniness=funniness,
                                  field_lms=field_lms, global_lm=global_lm,
                                  connotations=lists)


def cmd_train(config: PipelineConfig, out_dir: str, model_name: str) -> None:
    config.require_paths(["corpus"], "train")
    manifest = _new_manifest("train", config, seed=config.section("mlp")["seed"])
    manifest.add_input(config.path("corpus"))
    records = _load_labeled_corpus(config)
    labels = _labels_of(records)
    artifacts = []
    folds = config.section("eval")["folds"]
    split_seed = config.section("split")["seed"]

    if model_name == "iggy":
        matrix, spec, _ = _load_features_for(config, records)
        by_id = {rec.id: row for rec, row in zip(records, matrix)}
        report = evaluation.cross_validate(records, folds,
                                           _cv_trainer_iggy(config, by_id),
                                           seed=split_seed)
        model = _train_iggy(config, records, matrix, spec)
        model_path = os.path.join(out_dir, "model_iggy.json")
        classify.save_model(model, model_path)
        report_path = os.path.join(out_dir, "cv_report.csv")
        _write_cv_report(report_path, {"iggy": report})
        artifacts += [model_path, report_path]
        log.info("iggy %d-fold accuracy: %.3f +- %.3f", folds,
                 report["accuracy"]["mean"], report["accuracy"]["std"])

    elif model_name == "lr_bow":
        report = evaluation.cross_validate(records, folds, _cv_trainer_bow(config),
                                           seed=split_seed)
        model = classify.train_logreg_bow([rec.text for rec in records], labels,
                                          l2=config.section("bow")["l2"])
        model_path = os.path.join(out_dir, "model_lr_bow.json")
        classify.save_model(model, model_path)
        report_path = os.path.join(out_dir, "cv_report.csv")
        _write_cv_report(report_path, {"lr_bow": report})
        artifacts += [model_path, report_path]
        log.info("lr_bow %d-fold accuracy: %.3f", folds, report["accuracy"]["mean"])

    elif model_name == "rule":
        res = _rule_resources(config, records)
        lm_dir = config.path("lm_dir")
        if lm_dir and os.path.exists(_tagger_path(lm_dir)):
            _tag_records(records, postag.load_tagger(_tagger_path(lm_dir)))
        rc, table = classify.fit_rule_thresholds(records, labels.tolist(),
                                                 config.section("rule"), res)
        model_path = os.path.join(out_dir, "model_rule.json")
        classify.save_model(rc, model_path)
        table_path = os.path.join(out_dir, "rule_table.csv")
        with open(table_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["field", "accuracy", "n", "aoa_low", "funniness_high",
                             "surprisal_field_high", "surprisal_global_high"])
            for fieldname in sorted(table):
                acc, n = table[fieldname]
                cell = rc.per_field.get(fieldname, rc.fallback)
                writer.writerow([fieldname, repr(acc), n, cell.aoa_low,
                                 cell.funniness_high, cell.surprisal_field_high,
                                 cell.surprisal_global_high])
                log.info("rule[%s]: accuracy %.3f over %d records", fieldname, acc, n)
        artifacts += [model_path, table_path]

    elif model_name == "fusion":
        matrix, spec, res = _load_features_for(config, records)
        if res is None:
            res = build_resources(config)
        embed_table = None
        for table in res.external.values():
            if table.embeddings:
                embed_table = table
                break
        if embed_table is None:
            raise ConfigError("fusion training needs an external score table "
                              "with embeddings (paths.external_scores)")
        missing = [rec.id for rec in records if rec.id not in embed_table.embeddings]
        if missing:
            raise InputError(f"external table lacks embeddings for {missing[:3]}")
        E = np.array([embed_table.embedding(rec.id) for rec in records])
        do_std = config.section("mlp")["standardize"]
        X, stats = features.standardize(matrix) if do_std else (matrix, None)
        model = classify.train_fusion(X, E, labels, _mlp_config(config))
        model.standardization = stats
        model.spec_hash = spec.spec_hash()
        model_path = os.path.join(out_dir, "model_fusion.json")
        classify.save_model(model, model_path)
        artifacts.append(model_path)
        log.info("fusion trained: %d features + %d-dim embeddings",
                 matrix.shape[1], E.shape[1])

    elif model_name == "ensemble":
        matrix, spec, res = _load_features_for(config, records)
        if res is None:
            res = build_resources(config)
        split = split_dataset(records, SplitSpec(
            ratios=tuple(config.section("split")["ratios"]),
            seed=split_seed,
            names=("train", "ensemble_train", "test")))
        by_id = {rec.id: row for rec, row in zip(records, matrix)}
        base_tags = config.section("ensemble")["base"]
        base_models = {}
        scores = []
        for tag in base_tags:
            if tag == "iggy":
                X = np.array([by_id[rec.id] for rec in split["train"]])
                Xs, stats = features.standardize(X)
                m = classify.train_mlp(Xs, _labels_of(split["train"]), _mlp_config(config))
                m.standardization = stats
                m.spec_hash = spec.spec_hash()
                base_models[tag] = m
                Xe = np.array([by_id[rec.id] for rec in split["ensemble_train"]])
                scores.append(m.predict_proba(Xe))
            elif tag == "lr_bow":
                m = classify.train_logreg_bow(
                    [rec.text for rec in split["train"]],
                    _labels_of(split["train"]), l2=config.section("bow")["l2"])
                base_models[tag] = m
                scores.append(m.predict_proba([rec.text for rec in split["ensemble_train"]]))
            else:
                raise ConfigError(f"unknown ensemble base model {tag!r}")
        ens_records = split["ensemble_train"]
        meta_X, meta_names = (None, []) if config.section("ensemble")["reduced"] \
            else classify.ensemble_meta_features(ens_records, res)
        ens_cfg = MlpConfig(hidden=(config.section("ensemble")["hidden"],),
                            seed=config.section("ensemble")["seed"],
                            l2=0.01, lr=0.005)
        ens = classify.train_stacking_ensemble(
            np.vstack(scores), [rec.field for rec in ens_records], meta_X,
            _labels_of(ens_records), base_tags, meta_names, ens_cfg)
        model_path = os.path.join(out_dir, "model_ensemble.json")
        classify.save_model(ens, model_path)
        artifacts.append(model_path)
        for tag, m in base_models.items():
            path = os.path.join(out_dir, f"model_{tag}.json")
            classify.save_model(m, path)
            artifacts.append(path)
        log.info("stacking ensemble over %s trained on %d held-out rows",
                 base_tags, len(ens_records))
    else:
        raise ConfigError(f"unknown model {model_name!r}")

    _finish(manifest, out_dir, artifacts)


# ---------------------------------------------------------------------------
# rank


def cmd_rank(config: PipelineConfig, out_dir: str, model_file: str,
             top: int = 0) -> None:
    config.require_paths(["corpus"], "rank")
    if not os.path.exists(model_file):
        raise ConfigError(f"model file {model_file} does not exist")
    manifest = _new_manifest("rank", config)
    manifest.add_input(config.path("corpus"))
    manifest.add_input(model_file)

    records = _load_labeled_corpus(config)
    model = classify.load_classifier(model_file)

    if isinstance(model, classify.LinearBowModel):
        scores = model.predict_proba([rec.text for rec in records])
    elif isinstance(model, (classify.MlpModel, classify.FusionModel)):
        matrix, spec, res = _load_features_for(config, records)
        classify.check_spec_hash(model, spec.spec_hash())
        if isinstance(model, classify.FusionModel):
            if res is None:
                res = build_resources(config)
            table = next((t for t in res.external.values() if t.embeddings), None)
            if table is None:
                raise ConfigError("fusion ranking needs embeddings in external scores")
            E = np.array([table.embedding(rec.id) for rec in records])
            scores = model.predict_proba(matrix, E)
        else:
            scores = model.predict_proba(matrix)
    elif isinstance(model, classify.RuleClassifier):
        res = _rule_resources(config, records)
        lm_dir = config.path("lm_dir")
        if lm_dir and os.path.exists(_tagger_path(lm_dir)):
            _tag_records(records, postag.load_tagger(_tagger_path(lm_dir)))
        scores = np.array([
            float(classify.classify_with_rules(
                model, classify.build_rule_inputs(rec, res), rec.field))
            for rec in records])
    else:
        raise ConfigError(f"cannot rank with {type(model).__name__}")

    ranked = evaluation.RankedList.from_scores(
        [(rec.id, float(s)) for rec, s in zip(records, scores)])
    limit = top if top > 0 else len(ranked.ids)
    path = os.path.join(out_dir, "rank.tsv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id\tscore\trank\n")
        for i, (rid, score) in enumerate(zip(ranked.ids[:limit], ranked.scores[:limit]), 1):
            fh.write(f"{rid}\t{score!r}\t{i}\n")
    _finish(manifest, out_dir, [path])


def load_ranking_tsv(path: str) -> evaluation.RankedList:
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read ranking {path}: {exc}") from None
    ids, scores = [], []
    with fh:
        header = fh.readline().strip().split("\t")
        if header[:2] != ["id", "score"]:
            raise InputError(f"{path}: ranking TSV needs 'id\\tscore\\trank' header")
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            ids.append(parts[0])
            scores.append(float(parts[1]))
    return evaluation.RankedList(ids=ids, scores=scores)


# ---------------------------------------------------------------------------
# evaluate


def _named_rankings(config: PipelineConfig) -> dict[str, evaluation.RankedList]:
    rankings = {}
    for entry in config.path("rankings"):
        if "=" not in entry:
            raise ConfigError(
                f"paths.rankings entries must look like name=path, got {entry!r}")
        name, path = entry.split("=", 1)
        if not os.path.exists(path):
            raise ConfigError(f"ranking file {path} does not exist")
        rankings[name] = load_ranking_tsv(path)
    return rankings


def cmd_evaluate(config: PipelineConfig, out_dir: str, mode: str) -> None:
    manifest = _new_manifest("evaluate", config, seed=config.section("split")["seed"])
    artifacts = []

    if mode == "dataset":
        config.require_paths(["corpus"], "evaluate")
        manifest.add_input(config.path("corpus"))
        records = _load_labeled_corpus(config)
        folds = config.section("eval")["folds"]
        seed = config.section("split")["seed"]
        reports = {"lr_bow": evaluation.cross_validate(
            records, folds, _cv_trainer_bow(config), seed=seed)}
        matrix, spec, _ = _load_features_for(config, records)
        by_id = {rec.id: row for rec, row in zip(records, matrix)}
        reports["iggy"] = evaluation.cross_validate(
            records, folds, _cv_trainer_iggy(config, by_id), seed=seed)
        report_path = os.path.join(out_dir, "dataset_metrics.csv")
        _write_cv_report(report_path, reports)
        artifacts.append(report_path)
        fig_path = os.path.join(out_dir, "dataset_accuracy.svg")
        tsv_path = os.path.join(out_dir, "dataset_accuracy.tsv")
        plots.plot_metric_bars({n: r["accuracy"]["mean"] for n, r in reports.items()},
                               fig_path, tsv_path, ylabel="accuracy",
                               title=f"{folds}-fold CV accuracy")
        artifacts += [fig_path, tsv_path]

        # per-feature signed-rank report (requires near-balanced classes)
        labels = [rec.label for rec in records]
        if abs(sum(labels) - (len(labels) - sum(labels))) <= 1:
            rows = evaluation.feature_report(matrix, labels, names=spec.names(),
                                             seed=seed)
            fr_path = os.path.join(out_dir, "feature_report.csv")
            evaluation.export_feature_report(rows, fr_path)
            artifacts.append(fr_path)
        else:
            log.warning("classes unbalanced; skipping the per-feature report")

    elif mode == "ig_retrieval":
        config.require_paths(["corpus", "winners"], "evaluate")
        manifest.add_input(config.path("corpus"))
        manifest.add_input(config.path("winners"))
        records = _load_labeled_corpus(config)
        with open(config.path("winners"), "r", encoding="utf-8") as fh:
            winner_ids = [line.strip() for line in fh if line.strip()]
        frac = config.section("split")["ensemble_fraction"]
        splits = make_ig_retrieval_split(records, winner_ids,
                                         seed=config.section("split")["seed"],
                                         ensemble_fraction=frac if frac > 0 else None)
        train, test = splits["train"], splits["test"]
        log.info("retrieval split: train %d, test %d (%d winners)",
                 len(train), len(test), len(winner_ids))

        matrix, spec, _ = _load_features_for(config, list(records))
        by_id = {rec.id: row for rec, row in zip(records, matrix)}
        X, stats = features.standardize(np.array([by_id[r.id] for r in train]))
        iggy_model = classify.train_mlp(X, _labels_of(train), _mlp_config(config))
        Xt, _ = features.standardize(np.array([by_id[r.id] for r in test]), stats)
        iggy_pred = (iggy_model.net.predict_proba(Xt)[:, 1] >= 0.5).astype(int)

        bow = classify.train_logreg_bow([r.text for r in train], _labels_of(train),
                                        l2=config.section("bow")["l2"])
        bow_pred = (bow.predict_proba([r.text for r in test]) >= 0.5).astype(int)

        gold = _labels_of(test)
        rows = {
            "iggy": evaluation.classification_report(iggy_pred.tolist(), gold.tolist()),
            "lr_bow": evaluation.classification_report(bow_pred.tolist(), gold.tolist()),
        }
        report_path = os.path.join(out_dir, "ig_retrieval_metrics.csv")
        with open(report_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model", "accuracy", "precision", "recall",
                             "train_size", "test_size"])
            for name in sorted(rows):
                rep = rows[name]
                writer.writerow([name, repr(rep.accuracy), repr(rep.precision),
                                 repr(rep.recall), len(train), len(test)])
                log.info("%s retrieval accuracy: %.3f", name, rep.accuracy)
        artifacts.append(report_path)

    elif mode == "wild":
        config.require_paths(["annotations"], "evaluate")
        manifest.add_input(config.path("annotations"))
        rankings = _named_rankings(config)
        if not rankings:
            raise ConfigError("evaluate wild needs paths.rankings entries (name=path)")
        matrix = evaluation.load_annotations(config.path("annotations"))
        question = config.section("eval")["question"]
        strict, _ = evaluation.aggregate_annotations(
            matrix, evaluation.DecisionRule(k=2, m=3), question)
        relaxed, _ = evaluation.aggregate_annotations(
            matrix, evaluation.DecisionRule(k=1, m=3), question)

        step = config.section("eval")["step"]
        ndcg_ks = config.section("eval")["ndcg_k"]
        report_path = os.path.join(out_dir, "wild_metrics.csv")
        curves = {}
        with open(report_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model", "scenario", "k", "ndcg"])
            for name, ranked in sorted(rankings.items()):
                annotated = [tid for tid in ranked.ids if tid in strict]
                rel_strict = [strict[tid] for tid in annotated]
                rel_relaxed = [relaxed[tid] for tid in annotated]
                if not annotated:
                    raise InputError(f"ranking {name!r} shares no ids with annotations")
                for k in ndcg_ks:
                    kk = min(k, len(annotated))
                    writer.writerow([name, "strict", kk,
                                     repr(evaluation.ndcg_at_k(rel_strict, kk))])
                    writer.writerow([name, "relaxed", kk,
                                     repr(evaluation.ndcg_at_k(rel_relaxed, kk))])
                curves[name] = evaluation.precision_at_k_curve(rel_relaxed, step=step)
        artifacts.append(report_path)

        fig = os.path.join(out_dir, "precision_at_k.svg")
        tsv = os.path.join(out_dir, "precision_at_k.tsv")
        plots.plot_precision_at_k(curves, fig, tsv, title="Precision at k (relaxed)")
        artifacts += [fig, tsv]

        if len(rankings) >= 2:
            overlap_k = min(config.section("eval")["overlap_k"],
                            min(len(r.ids) for r in rankings.values()))
            names = sorted(rankings)
            overlap_path = os.path.join(out_dir, "overlap.csv")
            with open(overlap_path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["model_a", "model_b", "k", "overlap"])
                for i, a in enumerate(names):
                    for b in names[i + 1:]:
                        ov = evaluation.top_k_overlap(rankings[a], rankings[b], overlap_k)
                        writer.writerow([a, b, overlap_k, repr(ov)])
            artifacts.append(overlap_path)

            tables = {name: dict(zip(r.ids, r.scores)) for name, r in rankings.items()}
            common = set.intersection(*[set(t) for t in tables.values()])
            if len(common) >= 2:
                tables = {n: {i: t[i] for i in common} for n, t in tables.items()}
                names_m, corr = evaluation.model_correlation_matrix(tables)
                heat = os.path.join(out_dir, "model_correlation.svg")
                heat_tsv = os.path.join(out_dir, "model_correlation.tsv")
                plots.plot_correlation_heatmap(names_m, corr, heat, heat_tsv)
                artifacts += [heat, heat_tsv]
    else:
        raise ConfigError(f"unknown evaluate mode {mode!r}")

    _finish(manifest, out_dir, artifacts)


# ---------------------------------------------------------------------------
# aggregate


def _load_gold_csv(path: str) -> dict[str, float]:
    out: dict[str, float] = {}
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        fields = set(reader.fieldnames or ())
        if "title_id" not in fields or not ({"label", "score"} & fields):
            raise InputError(f"{path}: needs header title_id plus label or score")
        value_key = "label" if "label" in fields else "score"
        for lineno, row in enumerate(reader, start=2):
            try:
                out[row["title_id"]] = float(row[value_key])
            except (TypeError, ValueError):
                raise InputError(f"{path}:{lineno}: bad {value_key}") from None
    return out


def cmd_aggregate(config: PipelineConfig, out_dir: str, rule_arg: Optional[str],
                  select: bool) -> None:
    config.require_paths(["annotations"], "aggregate")
    manifest = _new_manifest("aggregate", config)
    manifest.add_input(config.path("annotations"))
    matrix = evaluation.load_annotations(config.path("annotations"))
    question = config.section("eval")["question"]
    artifacts = []

    if select:
        if config.path("gold"):
            config.require_paths(["gold"], "aggregate")
            reference = _load_gold_csv(config.path("gold"))
            mode = "gold"
            manifest.add_input(config.path("gold"))
        elif config.path("expert"):
            config.require_paths(["expert"], "aggregate")
            reference = _load_gold_csv(config.path("expert"))
            mode = "expert"
            manifest.add_input(config.path("expert"))
        else:
            raise ConfigError("--select needs paths.gold or paths.expert")
        grid = [evaluation.DecisionRule(k=k, m=m)
                for k in (1, 2, 3) for m in (2, 3, 4, 5)]
        best, table = evaluation.select_decision_rule(matrix, reference, grid,
                                                      mode=mode, question=question)
        table_path = os.path.join(out_dir, "rule_table.csv")
        with open(table_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "m", "score", "chosen"])
            for rule, score in table:
                writer.writerow([rule.k, rule.m, repr(score),
                                 int(rule == best)])
        artifacts.append(table_path)
        rule = best
        log.info("selected decision rule: k=%d m=%d", rule.k, rule.m)
    else:
        if not rule_arg:
            raise ConfigError("aggregate needs --rule K,M or --select")
        try:
            k_str, m_str = rule_arg.split(",")
            rule = evaluation.DecisionRule(k=int(k_str), m=int(m_str))
        except ValueError as exc:
            raise ConfigError(f"--rule must look like K,M: {exc}") from None

    labels, flagged = evaluation.aggregate_annotations(matrix, rule, question)
    labels_path = os.path.join(out_dir, "labels.csv")
    with open(labels_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["title_id", "label", "underrated"])
        for tid in sorted(labels):
            writer.writerow([tid, labels[tid], int(tid in flagged)])
    artifacts.append(labels_path)
    _finish(manifest, out_dir, artifacts)


# ---------------------------------------------------------------------------
# report


def cmd_report(config: PipelineConfig, out_dir: str) -> None:
    """Render figures for existing rankings against labels (gold CSV or an
    aggregated annotation rule)."""
    rankings = _named_rankings(config)
    if not rankings:
        raise ConfigError("report needs paths.rankings entries (name=path)")
    manifest = _new_manifest("report", config)

    if config.path("gold"):
        config.require_paths(["gold"], "report")
        manifest.add_input(config.path("gold"))
        labels = {tid: int(v) for tid, v in _load_gold_csv(config.path("gold")).items()}
    elif config.path("annotations"):
        config.require_paths(["annotations"], "report")
        manifest.add_input(config.path("annotations"))
        matrix = evaluation.load_annotations(config.path("annotations"))
        rule = evaluation.DecisionRule(k=config.section("eval")["rule_k"],
                                       m=config.section("eval")["rule_m"])
        labels, _ = evaluation.aggregate_annotations(
            matrix, rule, config.section("eval")["question"])
    else:
        raise ConfigError("report needs paths.gold or paths.annotations")

    artifacts = []
    curves = {}
    ndcg_values = {}
    step = config.section("eval")["step"]
    for name, ranked in sorted(rankings.items()):
        annotated = [tid for tid in ranked.ids if tid in labels]
        if not annotated:
            raise InputError(f"ranking {name!r} shares no ids with the labels")
        rel = [labels[tid] for tid in annotated]
        curves[name] = evaluation.precision_at_k_curve(rel, step=step)
        ndcg_values[name] = evaluation.ndcg_at_k(rel, min(50, len(rel)))

    fig = os.path.join(out_dir, "precision_at_k.svg")
    tsv = os.path.join(out_dir, "precision_at_k.tsv")
    plots.plot_precision_at_k(curves, fig, tsv)
    artifacts += [fig, tsv]

    bars = os.path.join(out_dir, "ndcg.svg")
    bars_tsv = os.path.join(out_dir, "ndcg.tsv")
    plots.plot_metric_bars(ndcg_values, bars, bars_tsv, ylabel="ndcg",
                           title="NDCG at top-50")
    artifacts += [bars, bars_tsv]

    if len(rankings) >= 2:
        tables = {name: dict(zip(r.ids, r.scores)) for name, r in rankings.items()}
        common = set.intersection(*[set(t) for t in tables.values()])
        if len(common) >= 2:
            tables = {n: {i: t[i] for i in common} for n, t in tables.items()}
            names_m, corr = evaluation.model_correlation_matrix(tables)
            heat = os.path.join(out_dir, "model_correlation.svg")
            heat_tsv = os.path.join(out_dir, "model_correlation.tsv")
            plots.plot_correlation_heatmap(names_m, corr, heat, heat_tsv)
            artifacts += [heat, heat_tsv]

    _finish(manifest, out_dir, artifacts)


# ---------------------------------------------------------------------------
# argument parsing


def _parse_args(argv: Sequence[str]):
    parser = argparse.ArgumentParser(
        prog="iggy",
        description="Literature-inspired scientific-humor scoring pipeline")
    parser.add_argument("--version", action="version", version="iggy 0.1.0")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="TOML config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker count (default: IGGY_THREADS or all cores)")

    common(sub.add_parser("build-lm", help="train n-gram LMs (words and POS)"))
    common(sub.add_parser("extract", help="extract the feature matrix"))
    p_train = sub.add_parser("train", help="train a classifier")
    common(p_train)
    p_train.add_argument("--model", required=True,
                         choices=["iggy", "lr_bow", "rule", "fusion", "ensemble"])
    p_rank = sub.add_parser("rank", help="rank a corpus by funniness score")
    common(p_rank)
    p_rank.add_argument("--model-file", required=True)
    p_rank.add_argument("--top", type=int, default=0, help="keep only the top N rows")
    p_eval = sub.add_parser("evaluate", help="run an evaluation protocol")
    common(p_eval)
    p_eval.add_argument("--mode", required=True,
                        choices=["dataset", "ig_retrieval", "wild"])
    p_agg = sub.add_parser("aggregate", help="aggregate crowd annotations")
    common(p_agg)
    p_agg.add_argument("--rule", default=None, help="decision rule K,M")
    p_agg.add_argument("--select", action="store_true",
                       help="pick the best rule against paths.gold or paths.expert")
    common(sub.add_parser("report", help="render report figures for rankings"))

    known, extra = parser.parse_known_args(argv)
    overrides = {}
    i = 0
    while i < len(extra):
        arg = extra[i]
        if not arg.startswith("--") or "." not in arg:
            raise ConfigError(f"unrecognized argument {arg!r}")
        key = arg[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            i += 1
            if i >= len(extra):
                raise ConfigError(f"override --{key} needs a value")
            value = extra[i]
        overrides[key] = value
        i += 1
    return known, overrides


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args, overrides = _parse_args(argv)
        if args.threads is not None:
            overrides["run.threads"] = str(args.threads)
        config = load_config(args.config, overrides)
        os.makedirs(args.out, exist_ok=True)
        if args.command == "build-lm":
            cmd_build_lm(config, args.out)
        elif args.command == "extract":
            cmd_extract(config, args.out)
        elif args.command == "train":
            cmd_train(config, args.out, args.model)
        elif args.command == "rank":
            cmd_rank(config, args.out, args.model_file, top=args.top)
        elif args.command == "evaluate":
            cmd_evaluate(config, args.out, args.mode)
        elif args.command == "aggregate":
            cmd_aggregate(config, args.out, args.rule, args.select)
        elif args.command == "report":
            cmd_report(config, args.out)
        return 0
    except IggyError as exc:
        log.error("%s", exc)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
