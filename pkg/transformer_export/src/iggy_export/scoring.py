"""Per-word scoring and title embeddings.

Word scores are negative log-likelihoods in nats, summed over a word's
subword pieces (log-likelihoods add, so the sum is the word's joint NLL).

- Bidirectional models score each piece by masking it and reading the
  model's log-probability of the original piece at that position.
- The causal model scores each piece given its prefix in one forward pass.

Embeddings are the final hidden state at the leading [cls] position of the
bidirectional model, one fixed-dimension vector per title.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .model import TinyLm
from .subwords import CLS, MASK, PieceVocab, encode_words


@torch.no_grad()
def masked_word_scores(model: TinyLm, vocab: PieceVocab, words: list[str]) -> list[float]:
    """One masked forward per piece, batched; returns one score per word."""
    if not words:
        return []
    _, ids, counts = encode_words(vocab, words)
    cls_id = vocab.id_of(CLS)
    mask_id = vocab.id_of(MASK)
    base = torch.tensor([cls_id] + ids, dtype=torch.long)
    n = len(ids)
    batch = base.repeat(n, 1)
    positions = torch.arange(1, n + 1)
    batch[torch.arange(n), positions] = mask_id
    logits = model(batch)
    log_probs = F.log_softmax(logits[torch.arange(n), positions], dim=-1)
    piece_nll = (-log_probs[torch.arange(n), torch.tensor(ids)]).tolist()

    scores = []
    cursor = 0
    for count in counts:
        scores.append(float(sum(piece_nll[cursor:cursor + count])))
        cursor += count
    return scores


@torch.no_grad()
def causal_word_scores(model: TinyLm, vocab: PieceVocab, words: list[str]) -> list[float]:
    """Single forward pass; piece i is scored from the logits at i-1."""
    if not words:
        return []
    _, ids, counts = encode_words(vocab, words)
    cls_id = vocab.id_of(CLS)
    seq = torch.tensor([[cls_id] + ids], dtype=torch.long)
    logits = model(seq)[0]
    log_probs = F.log_softmax(logits[:-1], dim=-1)
    targets = torch.tensor(ids)
    piece_nll = (-log_probs[torch.arange(len(ids)), targets]).tolist()

    scores = []
    cursor = 0
    for count in counts:
        scores.append(float(sum(piece_nll[cursor:cursor + count])))
        cursor += count
    return scores


@torch.no_grad()
def title_embedding(model: TinyLm, vocab: PieceVocab, words: list[str]) -> list[float]:
    """Final hidden state at the [cls] position; zeros for an empty title."""
    cls_id = vocab.id_of(CLS)
    if words:
        _, ids, _ = encode_words(vocab, words)
    else:
        ids = []
    seq = torch.tensor([[cls_id] + ids], dtype=torch.long)
    hidden = model.hidden_states(seq)
    return [float(v) for v in hidden[0, 0]]
