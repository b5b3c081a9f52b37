"""Corpus reading, export orchestration, and interchange validation.

The interchange JSONL carries one title per line:
``{"id", "model", "tokens", "scores", "embedding"?}`` with word-level tokens
(the consumer's word tokenization), scores in nats, and an optional
fixed-dimension embedding. The shipped validator enforces the schema so
exports fail here rather than at ingestion time.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Optional

from .model import load_checkpoint
from .scoring import causal_word_scores, masked_word_scores, title_embedding
from .words import word_tokens

log = logging.getLogger("iggy_export")

MODEL_TAGS = ("bert", "scibert", "gpt2")
_MODELS_DIR = os.path.join(os.path.dirname(__file__), "models")

# tag -> (checkpoint file, scoring mode); the bidirectional checkpoint backs
# both encoder tags until separately pretrained weights are supplied
DEFAULT_CHECKPOINTS = {
    "bert": ("tiny_mlm.pt", "mlm"),
    "scibert": ("tiny_mlm.pt", "mlm"),
    "gpt2": ("tiny_clm.pt", "clm"),
}


@dataclass
class ExportRequest:
    corpus: str
    model_tag: str
    out_path: str
    embeddings: bool = False
    weights: Optional[str] = None
    batch_log_every: int = 500

    def __post_init__(self):
        if self.model_tag not in MODEL_TAGS:
            raise ValueError(f"unknown model tag {self.model_tag!r}; "
                             f"expected one of {MODEL_TAGS}")
        out_dir = os.path.dirname(os.path.abspath(self.out_path))
        if not os.path.isdir(out_dir):
            raise ValueError(f"output directory {out_dir} does not exist")


def resolve_checkpoint(request: ExportRequest) -> tuple[str, str]:
    filename, mode = DEFAULT_CHECKPOINTS[request.model_tag]
    path = request.weights or os.path.join(_MODELS_DIR, filename)
    if not os.path.exists(path):
        raise FileNotFoundError(
            f"no weights for {request.model_tag!r}: {path} missing "
            "(pass --weights or run scripts/pretrain.py)")
    return path, mode


def read_corpus(path: str) -> list[tuple[str, str]]:
    """JSONL with id/title keys, or plain lines (ids are line numbers)."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.lstrip().startswith("{"):
                obj = json.loads(line)
                records.append((str(obj.get("id", lineno)), str(obj["title"])))
            else:
                records.append((str(lineno), line))
    return records


def export_corpus(request: ExportRequest) -> dict:
    """Score every title and write the interchange file in corpus order."""
    ckpt_path, mode = resolve_checkpoint(request)
    model, vocab, kind = load_checkpoint(ckpt_path)
    if kind != mode:
        raise ValueError(f"checkpoint {ckpt_path} is a {kind!r} model but tag "
                         f"{request.model_tag!r} needs {mode!r}")
    if request.embeddings and mode != "mlm":
        raise ValueError("embeddings come from the bidirectional model; "
                         "use the bert or scibert tag")

    records = read_corpus(request.corpus)
    written = 0
    skipped = 0
    with open(request.out_path, "w", encoding="utf-8") as out:
        for title_id, title in records:
            words = word_tokens(title)
            try:
                if mode == "mlm":
                    scores = masked_word_scores(model, vocab, words)
                else:
                    scores = causal_word_scores(model, vocab, words)
                record = {
                    "id": title_id,
                    "model": request.model_tag,
                    "tokens": words,
                    "scores": [round(s, 9) for s in scores],
                }
                if request.embeddings:
                    record["embedding"] = [round(v, 9) for v in
                                           title_embedding(model, vocab, words)]
            except Exception as exc:
                log.warning("skipping title %s: %s", title_id, exc)
                skipped += 1
                continue
            out.write(json.dumps(record, sort_keys=True) + "\n")
            written += 1
            if written % request.batch_log_every == 0:
                log.info("scored %d/%d titles", written, len(records))

    problems = validate_interchange(request.out_path)
    if problems:
        raise ValueError("export failed validation: " + "; ".join(problems[:5]))
    return {"written": written, "skipped": skipped, "titles": len(records)}


def validate_interchange(path: str) -> list[str]:
    """Schema check for interchange files; returns a list of problems."""
    problems = []
    seen_ids = set()
    model_tag = None
    embed_dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append(f"{where}: bad JSON ({exc.msg})")
                continue
            missing = [k for k in ("id", "model", "tokens", "scores") if k not in obj]
            if missing:
                problems.append(f"{where}: missing keys {missing}")
                continue
            if obj["model"] not in MODEL_TAGS + ("other",):
                problems.append(f"{where}: unknown model tag {obj['model']!r}")
            if model_tag is None:
                model_tag = obj["model"]
            elif obj["model"] != model_tag:
                problems.append(f"{where}: mixed model tags")
            if obj["id"] in seen_ids:
                problems.append(f"{where}: duplicate id {obj['id']!r}")
            seen_ids.add(obj["id"])
            if len(obj["tokens"]) != len(obj["scores"]):
                problems.append(f"{where}: {len(obj['tokens'])} tokens vs "
                                f"{len(obj['scores'])} scores")
            for s in obj["scores"]:
                if not isinstance(s, (int, float)) or not math.isfinite(s):
                    problems.append(f"{where}: non-finite score")
                    break
                if s < 0:
                    problems.append(f"{where}: negative log-likelihood below 0")
                    break
            if "embedding" in obj and obj["embedding"] is not None:
                if embed_dim is None:
                    embed_dim = len(obj["embedding"])
                elif len(obj["embedding"]) != embed_dim:
                    problems.append(f"{where}: embedding dimension drift")
                if any(not math.isfinite(v) for v in obj["embedding"]):
                    problems.append(f"{where}: non-finite embedding")
    return problems
