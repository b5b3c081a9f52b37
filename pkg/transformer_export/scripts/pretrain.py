#!/usr/bin/env python3
"""Regenerate the bundled corpus and pretrained checkpoints.

Usage: python scripts/pretrain.py [package_root]

Writes fixtures/english_corpus.txt plus src/iggy_export/models/tiny_mlm.pt
and tiny_clm.pt. Everything is seeded, so reruns reproduce the same corpus;
checkpoints depend on torch kernels but are regenerated rarely and shipped.
"""

from __future__ import annotations

import random
import sys
from collections import Counter
from pathlib import Path

import torch
import torch.nn.functional as F

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from iggy_export.model import ModelConfig, TinyLm, save_checkpoint
from iggy_export.subwords import CLS, MASK, PAD, PieceVocab, build_vocab, encode_words
from iggy_export.words import word_tokens

SEED = 1234

SUBJECTS = ["cat", "dog", "bird", "child", "man", "woman", "horse", "fish",
            "farmer", "teacher", "boy", "girl", "cook", "nurse", "driver",
            "rabbit", "mouse", "sheep", "cow", "duck"]
PLACES = ["mat", "chair", "table", "house", "garden", "river", "road",
          "kitchen", "field", "market", "barn", "bed", "floor", "wall",
          "park", "yard", "shop", "school", "bridge", "boat"]
VERBS_PAST = ["sat", "slept", "ran", "walked", "jumped", "stood", "waited",
              "played", "worked", "rested", "swam", "ate", "looked", "stayed",
              "moved", "fell", "lay", "hid", "sang", "read"]
ADJECTIVES = ["old", "young", "small", "big", "quiet", "happy", "tired",
              "hungry", "wet", "warm", "soft", "dark", "green", "busy"]
PREPS = ["on", "in", "near", "by", "under", "behind", "beside"]
# rare-ish words so character pieces see gradient during pretraining
TECHNICAL = ["barometer", "telescope", "microscope", "thermostat", "dynamo",
             "gyroscope", "voltmeter", "pendulum", "capacitor", "crucible"]

TEMPLATES = [
    "the {s} {v} {p} the {pl}",
    "a {s} {v} {p} the {pl}",
    "the {a} {s} {v} {p} the {pl}",
    "the {s} and the {s2} {v} {p} the {pl}",
    "why the {s} {v} {p} the {pl}",
    "the {s} {v} {p} a {a} {pl}",
    "every {s} {v} {p} the {pl}",
    "the {s} {v} and then {v2} {p} the {pl}",
    "no {s} ever {v} {p} the {pl}",
    "the {pl} held the {a} {s}",
]


def make_corpus(rng: random.Random, n_sentences: int = 4500) -> list[str]:
    lines = []
    for i in range(n_sentences):
        if i % 20 == 19:
            line = (f"the {rng.choice(TECHNICAL)} "
                    f"{rng.choice(['sat', 'stood', 'lay'])} "
                    f"{rng.choice(PREPS)} the {rng.choice(PLACES)}")
        else:
            template = rng.choice(TEMPLATES)
            line = template.format(
                s=rng.choice(SUBJECTS), s2=rng.choice(SUBJECTS),
                v=rng.choice(VERBS_PAST), v2=rng.choice(VERBS_PAST),
                a=rng.choice(ADJECTIVES), p=rng.choice(PREPS),
                pl=rng.choice(PLACES))
        lines.append(line)
    return lines


def batches(sequences: list[list[int]], pad_id: int, batch_size: int,
            rng: random.Random):
    order = list(range(len(sequences)))
    rng.shuffle(order)
    for start in range(0, len(order), batch_size):
        chunk = [sequences[i] for i in order[start:start + batch_size]]
        width = max(len(seq) for seq in chunk)
        ids = torch.full((len(chunk), width), pad_id, dtype=torch.long)
        for row, seq in enumerate(chunk):
            ids[row, :len(seq)] = torch.tensor(seq)
        yield ids


def train_mlm(vocab: PieceVocab, sequences: list[list[int]], epochs: int = 48):
    torch.manual_seed(SEED)
    config = ModelConfig(vocab_size=len(vocab), causal=False)
    model = TinyLm(config)
    optimizer = torch.optim.Adam(model.parameters(), lr=3e-4)
    pad_id, mask_id = vocab.id_of(PAD), vocab.id_of(MASK)
    rng = random.Random(SEED + 1)
    gen = torch.Generator().manual_seed(SEED + 2)
    for epoch in range(epochs):
        total, steps = 0.0, 0
        for ids in batches(sequences, pad_id, 64, rng):
            mask_probs = torch.rand(ids.shape, generator=gen)
            maskable = ids != pad_id
            maskable[:, 0] = False  # keep [cls]
            chosen = (mask_probs < 0.15) & maskable
            if not chosen.any():
                continue
            corrupted = ids.clone()
            corrupted[chosen] = mask_id
            logits = model(corrupted, pad_id=pad_id)
            loss = F.cross_entropy(logits[chosen], ids[chosen])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(loss)
            steps += 1
        print(f"mlm epoch {epoch + 1}/{epochs}: loss {total / steps:.4f}")
    model.eval()
    return model


def train_clm(vocab: PieceVocab, sequences: list[list[int]], epochs: int = 32):
    torch.manual_seed(SEED + 10)
    config = ModelConfig(vocab_size=len(vocab), causal=True)
    model = TinyLm(config)
    optimizer = torch.optim.Adam(model.parameters(), lr=3e-4)
    pad_id = vocab.id_of(PAD)
    rng = random.Random(SEED + 11)
    for epoch in range(epochs):
        total, steps = 0.0, 0
        for ids in batches(sequences, pad_id, 64, rng):
            logits = model(ids, pad_id=pad_id)
            targets = ids[:, 1:].reshape(-1)
            flat = logits[:, :-1].reshape(-1, logits.shape[-1])
            keep = targets != pad_id
            loss = F.cross_entropy(flat[keep], targets[keep])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(loss)
            steps += 1
        print(f"clm epoch {epoch + 1}/{epochs}: loss {total / steps:.4f}")
    model.eval()
    return model


def main() -> None:
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1]
    rng = random.Random(SEED)
    lines = make_corpus(rng)
    corpus_path = root / "fixtures" / "english_corpus.txt"
    corpus_path.parent.mkdir(parents=True, exist_ok=True)
    corpus_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"corpus: {len(lines)} sentences -> {corpus_path}")

    counts = Counter(w for line in lines for w in word_tokens(line))
    vocab = build_vocab(counts, min_count=3)
    print(f"vocabulary: {len(vocab)} pieces")

    cls_id = vocab.id_of(CLS)
    sequences = []
    for line in lines:
        _, ids, _ = encode_words(vocab, word_tokens(line))
        sequences.append([cls_id] + ids)

    models_dir = root / "src" / "iggy_export" / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    mlm = train_mlm(vocab, sequences)
    save_checkpoint(str(models_dir / "tiny_mlm.pt"), mlm, vocab, "mlm")
    clm = train_clm(vocab, sequences)
    save_checkpoint(str(models_dir / "tiny_clm.pt"), clm, vocab, "clm")
    print(f"checkpoints written to {models_dir}")


if __name__ == "__main__":
    main()
