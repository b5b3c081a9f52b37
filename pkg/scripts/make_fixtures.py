#!/usr/bin/env python3
"""Regenerate the checked-in fixtures deterministically.

Usage: python scripts/make_fixtures.py [repo_root]

Writes fixtures/pos/tagged_corpus.txt, the fixtures/demo/ pipeline inputs,
and the fixtures/probe/ corpus used by the score exporter tests.  All
content is seeded so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
import random
import sys
from pathlib import Path

SEED = 20240409

VOCAB = {
    "DET": ["the", "a", "an", "this", "these", "some", "every", "no"],
    "NOUN": [
        "cat", "cats", "dog", "dogs", "chicken", "chickens", "human", "humans",
        "coffee", "paper", "papers", "mat", "bird", "birds", "fish", "cow",
        "cows", "sheep", "frog", "frogs", "student", "students", "scientist",
        "scientists", "result", "results", "study", "effect", "spoon", "food",
        "mouth", "pigeon", "pigeons", "title", "titles", "water", "tea",
        "biscuit", "ear", "ears", "head", "maze", "prize", "prizes", "syrup",
        "magnet", "magnets", "beer", "hat", "hats", "nose", "tail", "wings",
    ],
    "PROPN": ["monet", "picasso", "darwin", "newton", "gabon", "corsica", "oslo"],
    "VERB": [
        "prefer", "prefers", "preferred", "eat", "eats", "ate", "walk",
        "walks", "walked", "spill", "spills", "spilled", "like", "likes",
        "liked", "see", "sees", "saw", "swim", "swims", "swam", "wash",
        "washes", "washed", "drop", "drops", "dropped", "measure", "measures",
        "measured", "sing", "sings", "sang", "float", "floats", "floated",
    ],
    "ADJ": [
        "beautiful", "funny", "big", "small", "old", "young", "quick", "lazy",
        "wet", "dry", "strange", "simple", "happy", "serious", "soft", "loud",
    ],
    "ADV": ["quickly", "slowly", "often", "never", "very", "badly", "gently"],
    "ADP": ["of", "in", "on", "with", "for", "from", "to", "under", "near"],
    "PRON": ["it", "they", "we", "he", "she", "you"],
    "NUM": ["one", "two", "three", "ten", "2", "10"],
    "CONJ": ["and", "or", "but"],
    "PUNCT": [".", ",", "?", ":"],
}

TEMPLATES = [
    ["DET", "ADJ", "NOUN", "VERB", "ADP", "DET", "NOUN", "PUNCT"],
    ["NOUN", "VERB", "ADJ", "NOUN"],
    ["PRON", "VERB", "DET", "NOUN", "ADV", "PUNCT"],
    ["DET", "NOUN", "ADP", "DET", "NOUN", "VERB", "ADV"],
    ["NOUN", "CONJ", "NOUN", "VERB", "ADP", "DET", "ADJ", "NOUN", "PUNCT"],
    ["NUM", "NOUN", "VERB", "DET", "ADJ", "NOUN"],
    ["PROPN", "VERB", "DET", "NOUN", "ADP", "PROPN", "PUNCT"],
    ["DET", "NOUN", "VERB", "ADV", "CONJ", "ADV"],
    ["ADJ", "NOUN", "VERB", "NOUN", "ADP", "NOUN"],
    ["PRON", "ADV", "VERB", "ADJ", "NOUN", "PUNCT"],
    ["DET", "ADJ", "ADJ", "NOUN", "VERB", "ADP", "NUM", "NOUN"],
    ["NOUN", "VERB", "ADP", "DET", "NOUN", "CONJ", "DET", "NOUN"],
]


def make_pos_fixture(root: Path, rng: random.Random) -> None:
    lines = ["chickens_NOUN prefer_VERB beautiful_ADJ humans_NOUN"]
    while len(lines) < 500:
        template = rng.choice(TEMPLATES)
        words = [rng.choice(VOCAB[tag]) for tag in template]
        lines.append(" ".join(f"{w}_{t}" for w, t in zip(words, template)))
    out = root / "fixtures" / "pos" / "tagged_corpus.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")


FUNNY_TITL_PARTS = {
    "animals": ["chickens", "cats", "cows", "pigeons", "frogs", "sheep", "wombats",
                "penguins", "hamsters", "ducks"],
    "silly_verbs": ["wobble", "giggle", "sneeze", "burp", "bounce", "waddle",
                    "slurp", "hiccup"],
    "funny_nouns": ["pants", "socks", "cheese", "pickle", "noodle", "bubble",
                    "banana", "jelly", "burp", "wig"],
}

SERIOUS_JARGON = [
    "asymptotic", "stochastic", "perturbation", "eigenvalue", "catalytic",
    "polymerization", "spectroscopy", "morphological", "hemodynamic",
    "thermodynamic", "quantitative", "longitudinal", "biosynthesis",
    "electrophoresis", "crystallography", "neoplastic", "immunoassay",
    "anisotropic", "oxidative", "metabolomic",
]

SERIOUS_NOUNS = [
    "analysis", "framework", "protocol", "dynamics", "synthesis", "regression",
    "pathway", "membrane", "substrate", "inhibitor", "lattice", "tensor",
    "cohort", "biomarker", "genome", "plasma", "neuron", "polymer",
]

VENUES = {
    "journal of brain studies": "neuroscience",
    "clinical trials weekly": "medicine",
    "annals of field biology": "biology",
    "physica acta": "exact_sciences",
}


def _funny_title(rng: random.Random) -> str:
    shape = rng.randrange(4)
    a = rng.choice(FUNNY_TITL_PARTS["animals"])
    v = rng.choice(FUNNY_TITL_PARTS["silly_verbs"])
    n = rng.choice(FUNNY_TITL_PARTS["funny_nouns"])
    if shape == 0:
        return f"Why do {a} {v} when they see {n}?"
    if shape == 1:
        return f"Do {a} prefer {n} or cheese?"
    if shape == 2:
        return f"On the {rng.choice(['rheology', 'aerodynamics', 'etiquette'])} of {a}"
    return f"Can {a} {v} faster in {rng.choice(['syrup', 'jelly', 'soup'])}?"


def _serious_title(rng: random.Random) -> str:
    j1 = rng.choice(SERIOUS_JARGON)
    j2 = rng.choice(SERIOUS_JARGON)
    n1 = rng.choice(SERIOUS_NOUNS)
    n2 = rng.choice(SERIOUS_NOUNS)
    shape = rng.randrange(3)
    if shape == 0:
        return f"{j1.capitalize()} {n1} of {j2} {n2} in a {rng.choice(SERIOUS_NOUNS)} model"
    if shape == 1:
        return f"A {j1} approach to {n1} {n2} estimation"
    return f"{j1.capitalize()} and {j2} effects on {n1} {n2}"


def make_demo_fixture(root: Path, rng: random.Random) -> None:
    demo = root / "fixtures" / "demo"
    demo.mkdir(parents=True, exist_ok=True)
    field_cycle = ["neuroscience", "medicine", "biology", "exact_sciences"]
    venue_by_field = {f: v for v, f in VENUES.items()}

    records = []
    for i in range(60):
        funny = i % 2 == 0
        fieldname = field_cycle[i % 4]
        rec = {
            "id": f"t{i:03d}",
            "title": _funny_title(rng) if funny else _serious_title(rng),
            "label": 1 if funny else 0,
            "field": fieldname,
        }
        if i % 5 == 0:
            rec["venue"] = venue_by_field[fieldname]
        records.append(rec)
    with open(demo / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

    winners = [rec["id"] for rec in records if rec["label"] == 1][:6]
    (demo / "winners.txt").write_text("\n".join(winners) + "\n", encoding="utf-8")

    with open(demo / "venue_map.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["venue", "field"])
        for venue, fieldname in sorted(VENUES.items()):
            writer.writerow([venue, fieldname])

    jokes = []
    for _ in range(80):
        a = rng.choice(FUNNY_TITL_PARTS["animals"])
        n = rng.choice(FUNNY_TITL_PARTS["funny_nouns"])
        v = rng.choice(FUNNY_TITL_PARTS["silly_verbs"])
        jokes.append(rng.choice([
            f"i told my {a} about {n} and now it wont stop {v}ing",
            f"never trust a {a} with your {n}",
            f"my {a} {v}s every time the {n} appears",
            f"what do you call a {a} with a {n}? a {v}",
        ]))
    (demo / "jokes.txt").write_text("\n".join(jokes) + "\n", encoding="utf-8")

    simple_words = {
        "cat": 3.5, "cats": 3.5, "dog": 3.6, "cheese": 4.2, "pants": 4.0,
        "socks": 3.9, "banana": 4.1, "jelly": 4.5, "soup": 4.0, "syrup": 6.0,
        "bubble": 4.3, "noodle": 4.8, "pickle": 5.1, "wig": 5.5, "burp": 5.0,
        "chickens": 4.6, "cows": 4.4, "sheep": 4.7, "frogs": 4.9, "ducks": 4.2,
        "pigeons": 6.2, "penguins": 5.8, "hamsters": 5.6, "wombats": 8.0,
        "see": 3.0, "why": 4.0, "do": 3.2, "when": 4.1, "they": 3.8,
        "prefer": 7.5, "faster": 5.2, "can": 3.1, "or": 3.4,
    }
    jargon_words = {w: 14.0 + (i % 5) for i, w in enumerate(SERIOUS_JARGON)}
    jargon_words.update({w: 10.0 + (i % 4) for i, w in enumerate(SERIOUS_NOUNS)})
    with open(demo / "aoa.tsv", "w", encoding="utf-8") as fh:
        for word, value in sorted({**simple_words, **jargon_words}.items()):
            fh.write(f"{word}\t{value}\n")

    funny_values = {w: 2.0 + 0.1 * (i % 7) for i, w in
                    enumerate(FUNNY_TITL_PARTS["funny_nouns"] + FUNNY_TITL_PARTS["animals"])}
    dull_values = {w: 0.3 + 0.05 * (i % 4) for i, w in enumerate(SERIOUS_NOUNS)}
    with open(demo / "funniness.tsv", "w", encoding="utf-8") as fh:
        for word, value in sorted({**funny_values, **dull_values}.items()):
            fh.write(f"{word}\t{value}\n")

    valence = {w: 0.6 for w in FUNNY_TITL_PARTS["funny_nouns"]}
    valence.update({w: -0.1 for w in SERIOUS_NOUNS[:10]})
    with open(demo / "valence.tsv", "w", encoding="utf-8") as fh:
        for word, value in sorted(valence.items()):
            fh.write(f"{word}\t{value}\n")

    familiar = sorted(set(simple_words) | {
        "the", "a", "an", "of", "in", "on", "and", "to", "with", "what",
        "call", "never", "trust", "my", "now", "it", "every", "time", "faster",
    })
    (demo / "familiar_words.txt").write_text("\n".join(familiar) + "\n", encoding="utf-8")

    (demo / "whitelist.txt").write_text("coitus\nbuttocks\nunderpants\n", encoding="utf-8")
    (demo / "blacklist.txt").write_text("abuse\nchild\nhiv\n", encoding="utf-8")

    crude_words = ["poop", "butt", "fart", "snot", "booger", "toilet", "undies"]
    benign_words = ["report", "meeting", "budget", "garden", "recipe", "weather",
                    "library"]
    fillers = ["about", "the", "my", "that", "please", "again", "today"]
    rows = []
    for i in range(200):
        crude = i % 2 == 0
        pool = crude_words if crude else benign_words
        words = [rng.choice(pool) for _ in range(3)] + [rng.choice(fillers) for _ in range(3)]
        rng.shuffle(words)
        rows.append((" ".join(words), 1 if crude else 0))
    with open(demo / "crude_train.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["text", "label"])
        writer.writerows(rows)

    # Crowd ratings correlated with the label, five workers per title.
    with open(demo / "annotations.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["title_id", "worker_id", "title_score", "topic_score"])
        for rec in records[:40]:
            for w in range(5):
                base = 4 if rec["label"] == 1 else 1
                tscore = min(5, max(1, base + rng.randint(-1, 1)))
                cscore = min(5, max(1, base + rng.randint(-1, 1)))
                writer.writerow([rec["id"], f"w{w}", tscore, cscore])

    with open(demo / "gold.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["title_id", "label"])
        for rec in records[:40]:
            writer.writerow([rec["id"], rec["label"]])

    # Synthetic external transformer scores (stand-in for real exporter output)
    # over the demo corpus: funny titles get slightly lower scores.
    from iggy.corpus import tokenize, words_of
    with open(demo / "external_bert.jsonl", "w", encoding="utf-8") as fh:
        for rec in records:
            words = words_of(tokenize(rec["title"]))
            scores = []
            for w in words:
                base = 2.0 if rec["label"] == 1 else 3.0
                scores.append(round(base + rng.random(), 6))
            emb = [round(rng.gauss(0.5 if rec["label"] else -0.5, 0.3), 6)
                   for _ in range(16)]
            fh.write(json.dumps({
                "id": rec["id"], "model": "bert", "tokens": words,
                "scores": scores, "embedding": emb,
            }, sort_keys=True) + "\n")


def make_probe_fixture(root: Path, rng: random.Random) -> None:
    probe = root / "fixtures" / "probe"
    probe.mkdir(parents=True, exist_ok=True)
    subjects = ["cat", "dog", "bird", "child", "man", "woman", "horse", "fish",
                "farmer", "teacher"]
    places = ["mat", "chair", "table", "house", "garden", "river", "road",
              "kitchen", "field", "market"]
    verbs = ["sat", "slept", "ran", "walked", "jumped", "stood", "waited",
             "played", "worked", "rested"]
    titles = []
    for i in range(50):
        s = subjects[i % len(subjects)]
        p = places[(i * 3 + 1) % len(places)]
        v = verbs[(i * 7 + 2) % len(verbs)]
        shapes = [
            f"the {s} {v} on the {p}",
            f"a {s} {v} near the {p}",
            f"the {s} and the {p}",
            f"why the {s} {v} in the {p}",
        ]
        titles.append(shapes[i % 4])
    with open(probe / "probe_corpus.jsonl", "w", encoding="utf-8") as fh:
        for i, title in enumerate(titles):
            fh.write(json.dumps({"id": f"p{i:03d}", "title": title},
                                sort_keys=True) + "\n")

    pairs = [
        {"context": "the cat sat on the mat", "position": 5,
         "common": "mat", "rare": "rheometer"},
        {"context": "the dog slept in the house", "position": 5,
         "common": "house", "rare": "polymerase"},
        {"context": "a child played in the garden", "position": 5,
         "common": "garden", "rare": "eigenvalue"},
        {"context": "the farmer worked in the field", "position": 5,
         "common": "field", "rare": "spectrometer"},
        {"context": "the horse ran on the road", "position": 5,
         "common": "road", "rare": "catalysis"},
        {"context": "the woman waited near the river", "position": 5,
         "common": "river", "rare": "anisotropy"},
        {"context": "the man stood near the table", "position": 5,
         "common": "table", "rare": "chromatograph"},
        {"context": "the teacher rested in the kitchen", "position": 5,
         "common": "kitchen", "rare": "oscilloscope"},
        {"context": "a bird jumped on the chair", "position": 5,
         "common": "chair", "rare": "centrifuge"},
        {"context": "the fish swam in the river", "position": 5,
         "common": "river", "rare": "interferometer"},
    ]
    with open(probe / "probe_pairs.json", "w", encoding="utf-8") as fh:
        json.dump(pairs, fh, indent=2, sort_keys=True)
        fh.write("\n")


def main() -> None:
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1]
    rng = random.Random(SEED)
    make_pos_fixture(root, rng)
    make_demo_fixture(root, rng)
    make_probe_fixture(root, rng)
    print(f"fixtures written under {root / 'fixtures'}")


if __name__ == "__main__":
    main()
