"""Transformer score exporter: per-word negative log-likelihoods (nats) and
frozen title embeddings, written as the interchange JSONL the scoring
toolkit ingests."""

__version__ = "0.1.0"
