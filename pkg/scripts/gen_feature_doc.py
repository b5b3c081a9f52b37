#!/usr/bin/env python3
"""Regenerate docs/FEATURES.md from the canonical registry.

A test asserts the document matches default_feature_spec output, so edit the
registry in code and rerun this script rather than editing the doc.
"""

from __future__ import annotations

import sys
from pathlib import Path

from iggy import lexicons, lm
from iggy.features import Resources, default_feature_spec


def full_resources() -> Resources:
    seqs = [["a", "b"], ["b", "c"]]
    lms = lambda tag: {n: lm.train_ngram(seqs, n=n, min_count=1, source_tag=tag)
                       for n in (1, 2, 3)}
    return Resources(
        title_lms=lms("title"),
        jokes_lms=lms("jokes"),
        pos_lms=lms("pos"),
        aoa=lexicons.WordValueTable(kind="aoa", entries={"a": 4.0}),
        funniness=lexicons.WordValueTable(kind="funniness", entries={"a": 1.0}),
        crudeness=lexicons.train_nbsvm([("bad stuff", 1), ("fine stuff", 0)]),
    )


HEADER = """\
# Feature registry

The canonical registry enumerated by `iggy.features.default_feature_spec`
with every internal resource available: nine n-gram LM sources (title, joke,
and POS corpora at orders 1-3), the age-of-acquisition table, the noun
funniness table, and the crudeness model.  That configuration yields the
**85 features** below, in registry order.

Per-word "surprisal" is the negative natural log probability of a word given
its context (nats).  The word *perplexity* in older write-ups corresponds to
this quantity through a monotone transform, so models trained on either see
the same ordering.

Each external transformer score table supplied at extraction time appends
three more features (`surprisal_<tag>_{mean,max,var}`) to the unexpected
family, e.g. 94 features with `bert`, `scibert`, and `gpt2` tables loaded.

Conventions baked into the registry:

- Raw LM stats cover every token plus the end-of-title transition; combined
  ratio/product stats cover word tokens only (punctuation and the end
  sentinel have no lexicon values).
- Words missing from a table fall back to age-of-acquisition 25.0 and
  funniness 0.0 inside combined features; plain table stats skip them and
  report coverage instead.
- Benign probabilities are floored at 1e-4 so ratio features stay finite.
- Noun funniness uses POS tags NOUN/PROPN; untagged records fall back to all
  words and the row is flagged in the missing mask.

| # | name | family | source | stat |
|---|------|--------|--------|------|
"""


def main() -> None:
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1]
    spec = default_feature_spec(full_resources())
    assert len(spec) == 85, f"registry drifted: {len(spec)} features"
    lines = [HEADER]
    for i, desc in enumerate(spec.descriptors, 1):
        lines.append(f"| {i} | `{desc.name}` | {desc.family} | {desc.source} "
                     f"| {desc.stat} |\n")
    out = root / "docs" / "FEATURES.md"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("".join(lines), encoding="utf-8")
    print(f"wrote {out} ({len(spec)} features)")


if __name__ == "__main__":
    main()
