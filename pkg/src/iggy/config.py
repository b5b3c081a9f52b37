"""Pipeline configuration: TOML file + command-line overrides + defaults.

Precedence is flags > file > defaults.  Every key is addressable as
``section.key`` and can be overridden with ``--section.key value``.
"""

from __future__ import annotations

import os
from typing import Any, Optional

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError
from .manifest import config_hash


def _bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _int_list(raw) -> list[int]:
    if isinstance(raw, list):
        return [int(v) for v in raw]
    return [int(v) for v in str(raw).split(",") if v.strip()]


def _float_list(raw) -> list[float]:
    if isinstance(raw, list):
        return [float(v) for v in raw]
    return [float(v) for v in str(raw).split(",") if v.strip()]


def _str_list(raw) -> list[str]:
    if isinstance(raw, list):
        return [str(v) for v in raw]
    return [v.strip() for v in str(raw).split(",") if v.strip()]


# section -> key -> (coercion, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "paths": {
        "corpus": (str, ""),
        "titles_corpus": (str, ""),
        "jokes_corpus": (str, ""),
        "venue_map": (str, ""),
        "aoa": (str, ""),
        "funniness": (str, ""),
        "valence": (str, ""),
        "familiar_words": (str, ""),
        "whitelist": (str, ""),
        "blacklist": (str, ""),
        "crude_train": (str, ""),
        "pos_tagged": (str, ""),
        "external_scores": (_str_list, []),
        "winners": (str, ""),
        "annotations": (str, ""),
        "gold": (str, ""),
        "expert": (str, ""),
        "lm_dir": (str, ""),
        "features_csv": (str, ""),
        "feature_spec": (str, ""),
        "rankings": (_str_list, []),
    },
    "lm": {
        "orders": (_int_list, [1, 2, 3]),
        "smoothing_k": (float, 1.0),
        "min_count": (int, 2),
    },
    "tagger": {"epochs": (int, 5), "seed": (int, 1)},
    "nbsvm": {"beta": (float, 0.25), "l2": (float, 1e-3)},
    "mlp": {
        "hidden": (int, 256),
        "lr": (float, 0.001),
        "l2": (float, 2.0),
        "max_epochs": (int, 500),
        "patience": (int, 10),
        "seed": (int, 42),
        "standardize": (_bool, True),
    },
    "bow": {"l2": (float, 1e-3)},
    "rule": {
        "aoa_low": (_float_list, [5.0, 7.0, 9.0, 11.0]),
        "funniness_high": (_float_list, [1.0, 1.5, 2.0]),
        "surprisal_field_high": (_float_list, [4.0, 6.0, 8.0]),
        "surprisal_global_high": (_float_list, [4.0, 6.0, 8.0]),
    },
    "ensemble": {
        "base": (_str_list, ["iggy", "lr_bow"]),
        "hidden": (int, 64),
        "reduced": (_bool, False),
        "seed": (int, 42),
    },
    "split": {
        "ratios": (_float_list, [0.8, 0.1, 0.1]),
        "seed": (int, 7),
        "ensemble_fraction": (float, 0.2045),
    },
    "eval": {
        "folds": (int, 5),
        "step": (int, 10),
        "ndcg_k": (_int_list, [50]),
        "overlap_k": (int, 10),
        "rule_k": (int, 1),
        "rule_m": (int, 3),
        "question": (str, "topic"),
        "top": (int, 0),
    },
    "run": {"threads": (int, 0)},
}


class PipelineConfig:
    def __init__(self, data: dict[str, dict[str, Any]]):
        self.data = data

    def get(self, dotted: str) -> Any:
        section, key = dotted.split(".", 1)
        return self.data[section][key]

    def section(self, name: str) -> dict[str, Any]:
        return self.data[name]

    def hash(self) -> str:
        return config_hash(self.data)

    def path(self, key: str) -> str:
        return self.data["paths"][key]

    def require_paths(self, keys: list[str], command: str) -> None:
        """Fail fast before any work: every named path must be set and exist."""
        problems = []
        for key in keys:
            value = self.data["paths"][key]
            values = value if isinstance(value, list) else [value]
            if not values or values == [""]:
                problems.append(f"paths.{key} is required by '{command}' but not set")
                continue
            for v in values:
                if not os.path.exists(v):
                    problems.append(f"paths.{key}: {v} does not exist")
        if problems:
            raise ConfigError("; ".join(problems))

    def threads(self) -> int:
        n = self.data["run"]["threads"]
        if n <= 0:
            env = os.environ.get("IGGY_THREADS", "")
            if env.strip():
                try:
                    n = int(env)
                except ValueError:
                    raise ConfigError(f"IGGY_THREADS must be an integer, got {env!r}") from None
            else:
                n = os.cpu_count() or 1
        return max(1, n)


def load_config(path: Optional[str] = None,
                overrides: Optional[dict[str, str]] = None) -> PipelineConfig:
    data: dict[str, dict[str, Any]] = {
        section: {key: default for key, (_, default) in keys.items()}
        for section, keys in SCHEMA.items()
    }

    if path:
        try:
            with open(path, "rb") as fh:
                loaded = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: invalid TOML ({exc})") from None
        for section, keys in loaded.items():
            if section not in SCHEMA:
                raise ConfigError(f"{path}: unknown section [{section}]")
            if not isinstance(keys, dict):
                raise ConfigError(f"{path}: section [{section}] must hold key = value pairs")
            for key, value in keys.items():
                if key not in SCHEMA[section]:
                    raise ConfigError(f"{path}: unknown key {section}.{key}")
                coerce, _ = SCHEMA[section][key]
                try:
                    data[section][key] = coerce(value)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{path}: bad value for {section}.{key}: {exc}") from None

    for dotted, raw in (overrides or {}).items():
        if "." not in dotted:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        section, key = dotted.split(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown config key {dotted!r}")
        coerce, _ = SCHEMA[section][key]
        try:
            data[section][key] = coerce(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for --{dotted}: {exc}") from None

    return PipelineConfig(data)
