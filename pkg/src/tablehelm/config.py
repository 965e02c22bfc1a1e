"""Run configuration: defaults, a flat key=value config file, environment
overrides, and command-line overrides, in that order of increasing
precedence (flags > environment > file > defaults).

Environment variables use the HELM_ prefix over the upper-cased key, e.g.
HELM_CACHE_DIR for cache_dir. Booleans accept true/false, yes/no, 1/0.
A step_cap or worker-style integer of 0 means "unbounded" where noted.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

from .errors import SchemaError

__all__ = ["RunConfig", "build_config", "load_config_file", "ENV_PREFIX"]

ENV_PREFIX = "HELM_"

ABLATIONS = ("full", "no_highlight", "subtab")
DATASET_FORMATS = ("canonical", "fetaqa", "qtsumm")


@dataclass(frozen=True)
class RunConfig:
    """Knobs shared by the batch commands."""

    dataset_format: str = "canonical"

    highlighter_endpoint: str = "echo"
    summarizer_endpoint: str = "echo"
    feedbacker_endpoint: str = "echo"
    distill_endpoint: str = ""  # empty: use the feedbacker endpoint

    highlighter_model: str = "highlighter"
    summarizer_model: str = "summarizer"
    feedbacker_model: str = "feedbacker"
    distill_model: str = "distill"

    # Template overrides; empty string means the packaged default.
    highlighter_template: str = ""
    summarizer_template: str = ""
    distill_template: str = ""
    distill_examples: str = ""

    # Sampling. The feedbacker defaults to greedy decoding: label search
    # compares rewards, which sampling noise would scramble.
    highlighter_temperature: float = 0.1
    highlighter_nucleus_p: float = 0.9
    summarizer_temperature: float = 0.1
    summarizer_nucleus_p: float = 0.9
    feedbacker_temperature: float = 0.0
    feedbacker_nucleus_p: float = 1.0
    max_new_tokens: int = 256

    cache_dir: str = ""  # empty: no response cache
    workers: int = 4
    timeout: float = 60.0
    max_attempts: int = 5
    max_in_flight: int = 4

    search_fallback: bool = True
    step_cap: int = 0  # accepted-additions cap; 0 = unbounded
    n_max: int = 12  # exhaustive-search row limit

    ablation: str = "full"
    token_budget: int = 2048
    success_threshold: float = 0.95

    def __post_init__(self) -> None:
        if self.ablation not in ABLATIONS:
            raise SchemaError("ablation", f"must be one of {ABLATIONS}")
        if self.dataset_format not in DATASET_FORMATS:
            raise SchemaError("dataset_format", f"must be one of {DATASET_FORMATS}")
        if self.workers < 1:
            raise SchemaError("workers", "must be at least 1")
        if self.max_attempts < 1:
            raise SchemaError("max_attempts", "must be at least 1")
        if self.max_in_flight < 1:
            raise SchemaError("max_in_flight", "must be at least 1")
        if self.step_cap < 0:
            raise SchemaError("step_cap", "must be 0 (unbounded) or positive")
        if self.n_max < 1:
            raise SchemaError("n_max", "must be at least 1")
        if self.token_budget < 1:
            raise SchemaError("token_budget", "must be at least 1")
        if not 0.0 <= self.success_threshold <= 1.0:
            raise SchemaError("success_threshold", "must be in [0, 1]")
        if self.timeout <= 0:
            raise SchemaError("timeout", "must be positive")
        for key in (
            "highlighter_template",
            "summarizer_template",
            "distill_template",
            "distill_examples",
        ):
            path = getattr(self, key)
            if path and not Path(path).is_file():
                raise SchemaError(key, f"file not found: {path}")

    @property
    def step_cap_or_none(self) -> int | None:
        return self.step_cap if self.step_cap > 0 else None


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str) -> object:
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if kind == "bool":
        lowered = raw.lower()
        if lowered in ("true", "yes", "1", "on"):
            return True
        if lowered in ("false", "no", "0", "off"):
            return False
        raise SchemaError(key, f"not a boolean: {raw!r}")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError as exc:
        raise SchemaError(key, f"not a {kind}: {raw!r}") from exc
    return raw


def load_config_file(path: str | Path) -> dict[str, str]:
    """Parse 'key = value' lines; '#' starts a comment, blanks are skipped."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            key, sep, value = stripped.partition("=")
            if not sep:
                raise SchemaError(
                    "config", f"{path}:{line_no}: expected key=value, got {stripped!r}"
                )
            key = key.strip()
            if key not in _FIELD_TYPES:
                raise SchemaError(key, f"{path}:{line_no}: unknown config key")
            values[key] = value.strip()
    return values


def build_config(
    file_path: str | Path | None = None,
    env: Mapping[str, str] = os.environ,
    overrides: Mapping[str, str] | None = None,
) -> RunConfig:
    """Assemble a RunConfig; flags beat environment beat file beat defaults."""
    raw: dict[str, str] = {}
    if file_path is not None:
        raw.update(load_config_file(file_path))
    for key in _FIELD_TYPES:
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            raw[key] = env[env_key]
    if overrides:
        for key, value in overrides.items():
            if key not in _FIELD_TYPES:
                raise SchemaError(key, "unknown config key")
            raw[key] = value
    return RunConfig(**{key: _coerce(key, value) for key, value in raw.items()})
