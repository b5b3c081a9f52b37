"""Small shared helpers: canonical JSON, checksums, finite checks."""

from __future__ import annotations

import hashlib
import json
import math
import zlib
from typing import Any, Iterable

from .errors import NumericError


def canonical_json(obj: Any) -> str:
    """Stable JSON encoding used for hashing and on-disk artifacts."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def crc32_of(text: str) -> int:
    return zlib.crc32(text.encode("utf-8")) & 0xFFFFFFFF


def sha256_of_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_of_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def require_finite(values: Iterable[float], what: str) -> None:
    for v in values:
        if not math.isfinite(v):
            raise NumericError(f"non-finite value in {what}: {v!r}")


def population_stats(values: list[float]) -> tuple[float, float, float, float]:
    """(mean, max, min, variance) with population variance; empty -> zeros."""
    if not values:
        return 0.0, 0.0, 0.0, 0.0
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return mean, max(values), min(values), var
