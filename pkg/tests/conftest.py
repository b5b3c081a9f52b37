"""Shared test helpers: seeded synthetic corpora and lexicon builders."""

import random

import pytest

from iggy.corpus import TitleRecord

FIELD_CYCLE = ("neuroscience", "medicine", "biology", "exact_sciences")

_SUBJECTS = ["cats", "dogs", "chickens", "students", "proteins", "magnets",
             "neurons", "pigeons", "antibodies", "polymers"]
_VERBS = ["prefer", "avoid", "measure", "predict", "inhibit", "absorb",
          "attract", "recall", "detect", "dissolve"]
_OBJECTS = ["humans", "mazes", "signals", "membranes", "jokes", "lattices",
            "stimuli", "reagents", "datasets", "fields"]
_MODS = ["beautiful", "noisy", "stochastic", "simple", "unexpected",
         "catalytic", "funny", "robust"]


def synthetic_title(rng: random.Random) -> str:
    shape = rng.randrange(3)
    s, v, o = rng.choice(_SUBJECTS), rng.choice(_VERBS), rng.choice(_OBJECTS)
    m = rng.choice(_MODS)
    if shape == 0:
        return f"{s} {v} {m} {o}"
    if shape == 1:
        return f"why do {s} {v} {o}?"
    return f"on the {m} {s} that {v} {o}"


def synthetic_records(n: int, seed: int = 0, labeled: bool = True) -> list[TitleRecord]:
    rng = random.Random(seed)
    records = []
    for i in range(n):
        records.append(TitleRecord(
            id=f"r{i:05d}",
            text=synthetic_title(rng),
            field=FIELD_CYCLE[i % 4],
            label=(i % 2) if labeled else None,
        ))
    return records


@pytest.fixture
def rng():
    return random.Random(12345)
