"""A small transformer language model with a token-prediction head.

One architecture serves both scoring modes: a bidirectional encoder trained
with masked tokens (used for the bert/scibert tags) and a causal decoder
trained on next-token prediction (the gpt2 tag). Inference runs without
dropout, so outputs are deterministic.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .subwords import PieceVocab

CHECKPOINT_FORMAT = "IGGY-EXPORT-CKPT-1"


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 128
    max_len: int = 96
    causal: bool = False


class SelfAttention(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.n_heads = config.n_heads
        self.d_head = config.d_model // config.n_heads
        self.qkv = nn.Linear(config.d_model, 3 * config.d_model)
        self.out = nn.Linear(config.d_model, config.d_model)

    def forward(self, x, attn_mask):
        b, t, d = x.shape
        q, k, v = self.qkv(x).chunk(3, dim=-1)

        def heads(tensor):
            return tensor.view(b, t, self.n_heads, self.d_head).transpose(1, 2)

        q, k, v = heads(q), heads(k), heads(v)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        if attn_mask is not None:
            scores = scores + attn_mask
        weights = F.softmax(scores, dim=-1)
        mixed = (weights @ v).transpose(1, 2).reshape(b, t, d)
        return self.out(mixed)


class Block(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(config.d_model)
        self.attn = SelfAttention(config)
        self.ln2 = nn.LayerNorm(config.d_model)
        self.ff = nn.Sequential(
            nn.Linear(config.d_model, config.d_ff),
            nn.GELU(),
            nn.Linear(config.d_ff, config.d_model),
        )

    def forward(self, x, attn_mask):
        x = x + self.attn(self.ln1(x), attn_mask)
        return x + self.ff(self.ln2(x))


class TinyLm(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.tok_emb = nn.Embedding(config.vocab_size, config.d_model)
        self.pos_emb = nn.Embedding(config.max_len, config.d_model)
        self.blocks = nn.ModuleList(Block(config) for _ in range(config.n_layers))
        self.ln_final = nn.LayerNorm(config.d_model)
        self.head = nn.Linear(config.d_model, config.vocab_size)

    def _mask(self, ids: torch.Tensor, pad_id):
        t = ids.shape[1]
        mask = torch.zeros(ids.shape[0], 1, t, t)
        if self.config.causal:
            mask = mask + torch.triu(torch.full((t, t), float("-inf")), diagonal=1)
        if pad_id is not None:
            # block attention *to* padding positions
            pad = (ids == pad_id).unsqueeze(1).unsqueeze(1)
            mask = mask.masked_fill(pad, float("-inf"))
        if not mask.any():
            return None
        return mask

    def hidden_states(self, ids: torch.Tensor, pad_id=None) -> torch.Tensor:
        b, t = ids.shape
        if t > self.config.max_len:
            raise ValueError(f"sequence length {t} exceeds max_len {self.config.max_len}")
        positions = torch.arange(t, device=ids.device).unsqueeze(0)
        x = self.tok_emb(ids) + self.pos_emb(positions)
        attn_mask = self._mask(ids, pad_id)
        for block in self.blocks:
            x = block(x, attn_mask)
        return self.ln_final(x)

    def forward(self, ids: torch.Tensor, pad_id=None) -> torch.Tensor:
        return self.head(self.hidden_states(ids, pad_id))


def save_checkpoint(path: str, model: TinyLm, vocab: PieceVocab, kind: str) -> None:
    torch.save({
        "format": CHECKPOINT_FORMAT,
        "kind": kind,
        "config": asdict(model.config),
        "pieces": list(vocab.pieces),
        "state_dict": model.state_dict(),
    }, path)


def load_checkpoint(path: str):
    """Returns (model in eval mode, vocab, kind)."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint {path} does not exist")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: expected checkpoint format {CHECKPOINT_FORMAT}, "
                         f"got {payload.get('format')!r}")
    config = ModelConfig(**payload["config"])
    model = TinyLm(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    vocab = PieceVocab(pieces=tuple(payload["pieces"]))
    return model, vocab, payload["kind"]
