"""Keeps docs/FEATURES.md in sync with the registry code."""

import os
import re

from iggy import lexicons, lm
from iggy.features import Resources, default_feature_spec

DOC = os.path.join(os.path.dirname(__file__), "..", "docs", "FEATURES.md")


def _full_resources():
    seqs = [["a", "b"], ["b", "c"]]

    def lms(tag):
        return {n: lm.train_ngram(seqs, n=n, min_count=1, source_tag=tag)
                for n in (1, 2, 3)}

    return Resources(
        title_lms=lms("title"), jokes_lms=lms("jokes"), pos_lms=lms("pos"),
        aoa=lexicons.WordValueTable(kind="aoa", entries={"a": 4.0}),
        funniness=lexicons.WordValueTable(kind="funniness", entries={"a": 1.0}),
        crudeness=lexicons.train_nbsvm([("bad stuff", 1), ("fine stuff", 0)]),
    )


def test_feature_doc_matches_registry():
    spec = default_feature_spec(_full_resources())
    with open(DOC, encoding="utf-8") as fh:
        doc_names = re.findall(r"^\| \d+ \| `([^`]+)`", fh.read(), re.MULTILINE)
    assert doc_names == spec.names()
    assert len(doc_names) == 85
