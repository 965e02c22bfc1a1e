"""Text-generation clients and the reward composition built on them.

Three interchangeable backends satisfy one small contract: an HTTP
chat-completions client for real model servers, a deterministic offline
oracle that reads the table straight out of the prompt (used to exercise
the label-search machinery without a model), and a fixed-output stub.
A content-addressed on-disk cache can wrap any of them. `feedback_reward`
composes prompt construction, generation, and scoring into the scalar
signal the evidence search consumes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import requests

from .errors import (
    AuthError,
    CacheIoError,
    EmptyEvidenceError,
    MalformedResponseError,
    NoTableFoundError,
    RateLimitError,
    TransportError,
)
from .metrics import eval_reward
from .prompting import DEFAULT_TOKEN_BUDGET, PromptTemplate, build_summarizer_prompt
from .table_core import Evidence, Table
from .transforms import parse_row_lines, subtable

__all__ = [
    "SamplingConfig",
    "SEARCH_SAMPLING",
    "SUMMARY_SAMPLING",
    "GeneratorClient",
    "HttpClient",
    "EchoClient",
    "FixedClient",
    "CountingClient",
    "ResponseCache",
    "cached_generate",
    "echo_oracle_generate",
    "feedback_reward",
]

logger = logging.getLogger(__name__)

REWARD_MODES = ("subtable", "highlight")


@dataclass(frozen=True)
class SamplingConfig:
    """Decoding parameters sent to a generator."""

    nucleus_p: float = 0.9
    temperature: float = 0.1
    max_new_tokens: int = 256

    def __post_init__(self) -> None:
        if not 0.0 < self.nucleus_p <= 1.0:
            raise ValueError(f"nucleus_p must be in (0, 1], got {self.nucleus_p}")
        if self.temperature < 0.0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_new_tokens < 1:
            raise ValueError(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")


# Greedy decoding for label search: reward comparisons are meaningless under
# sampling noise. The (0.9, 0.1) pair is the default for final summaries.
SEARCH_SAMPLING = SamplingConfig(nucleus_p=1.0, temperature=0.0)
SUMMARY_SAMPLING = SamplingConfig(nucleus_p=0.9, temperature=0.1)


@runtime_checkable
class GeneratorClient(Protocol):
    """Anything that can turn a prompt into a completion."""

    model_id: str

    def generate(self, prompt: str, cfg: SamplingConfig) -> str: ...


def _prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:12]


class HttpClient:
    """Chat-completions client over HTTP with retry and backoff.

    Transient failures (connection errors, 429, 5xx) are retried up to
    `max_attempts` times with exponential backoff; auth failures are not.
    `last_attempts` records how many attempts the most recent call used.
    A semaphore bounds concurrent in-flight requests.
    """

    API_KEY_ENV = "HELM_API_KEY"

    def __init__(
        self,
        endpoint: str,
        model_id: str,
        *,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_attempts: int = 5,
        max_in_flight: int = 4,
        backoff_base: float = 0.5,
        session: requests.Session | None = None,
        sleep=time.sleep,
    ) -> None:
        self.endpoint = endpoint
        self.model_id = model_id
        self.api_key = api_key if api_key is not None else os.environ.get(self.API_KEY_ENV)
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.last_attempts = 0
        self._backoff_base = backoff_base
        self._session = session if session is not None else requests.Session()
        self._sleep = sleep
        self._semaphore = threading.Semaphore(max_in_flight)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _payload(self, prompt: str, cfg: SamplingConfig) -> dict[str, object]:
        return {
            "model": self.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": cfg.temperature,
            "top_p": cfg.nucleus_p,
            "max_tokens": cfg.max_new_tokens,
        }

    @staticmethod
    def _extract_text(body: object) -> str:
        try:
            choice = body["choices"][0]  # type: ignore[index]
            text = choice["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(f"unexpected response shape: {exc}") from exc
        if not isinstance(text, str):
            raise MalformedResponseError("completion content is not text")
        return text

    def generate(self, prompt: str, cfg: SamplingConfig) -> str:
        digest = _prompt_digest(prompt)
        last_transient = "no attempt made"
        rate_limited = False
        for attempt in range(1, self.max_attempts + 1):
            self.last_attempts = attempt
            if attempt > 1:
                self._sleep(self._backoff_base * 2 ** (attempt - 2))
            try:
                with self._semaphore:
                    response = self._session.post(
                        self.endpoint,
                        json=self._payload(prompt, cfg),
                        headers=self._headers(),
                        timeout=self.timeout,
                    )
            except requests.RequestException as exc:
                last_transient = f"connection failure: {exc}"
                rate_limited = False
                logger.debug("prompt %s attempt %d: %s", digest, attempt, exc)
                continue
            status = response.status_code
            logger.debug("prompt %s attempt %d: HTTP %d", digest, attempt, status)
            if status in (401, 403):
                raise AuthError(f"HTTP {status} from {self.endpoint}")
            if status == 429:
                last_transient = "HTTP 429"
                rate_limited = True
                continue
            if status >= 500:
                last_transient = f"HTTP {status}"
                rate_limited = False
                continue
            if status >= 400:
                raise TransportError(f"HTTP {status} from {self.endpoint}")
            try:
                body = response.json()
            except ValueError as exc:
                raise MalformedResponseError(f"response is not JSON: {exc}") from exc
            return self._extract_text(body)
        if rate_limited:
            raise RateLimitError(
                f"still rate limited after {self.max_attempts} attempts"
            )
        raise TransportError(
            f"gave up after {self.max_attempts} attempts ({last_transient})"
        )


def echo_oracle_generate(prompt: str, cfg: SamplingConfig) -> str:
    """Deterministic stand-in for a summarizer: read the answer off the table.

    Starred rows (a highlighted table) contribute their cells; if no row is
    starred, every row does (a sub-table prompt). Cells are space-joined in
    row order, stars stripped.
    """
    rows = parse_row_lines(prompt)
    if not rows:
        raise NoTableFoundError("prompt contains no table row lines")
    starred = [cells for _, cells, is_starred in rows if is_starred]
    chosen = starred if starred else [cells for _, cells, _ in rows]
    return " ".join(" ".join(cells) for cells in chosen)


class EchoClient:
    """GeneratorClient wrapper around the echo oracle."""

    model_id = "echo-oracle"

    def generate(self, prompt: str, cfg: SamplingConfig) -> str:
        return echo_oracle_generate(prompt, cfg)


class FixedClient:
    """Always returns the same text; handy for stubbing a role."""

    def __init__(self, text: str, model_id: str = "fixed") -> None:
        self.text = text
        self.model_id = model_id

    def generate(self, prompt: str, cfg: SamplingConfig) -> str:
        return self.text


class CountingClient:
    """Delegating wrapper that counts generate() calls (thread-safe)."""

    def __init__(self, inner: GeneratorClient) -> None:
        self.inner = inner
        self.model_id = inner.model_id
        self.calls = 0
        self._lock = threading.Lock()

    def generate(self, prompt: str, cfg: SamplingConfig) -> str:
        with self._lock:
            self.calls += 1
        return self.inner.generate(prompt, cfg)


class ResponseCache:
    """Content-addressed completion store: one JSON file per request key.

    Keys cover model id, sampling config, and the full prompt bytes, so any
    change misses. Writes go through a temp file and an atomic rename, which
    keeps concurrent writers from leaving torn entries.
    """

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)

    @staticmethod
    def key(model_id: str, prompt: str, cfg: SamplingConfig) -> str:
        payload = json.dumps(
            {
                "model": model_id,
                "nucleus_p": cfg.nucleus_p,
                "temperature": cfg.temperature,
                "max_new_tokens": cfg.max_new_tokens,
                "prompt": prompt,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _entry_path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, model_id: str, prompt: str, cfg: SamplingConfig) -> str | None:
        path = self._entry_path(self.key(model_id, prompt, cfg))
        try:
            raw = path.read_text("utf-8")
        except FileNotFoundError:
            return None
        except OSError as exc:
            raise CacheIoError(f"cannot read {path}: {exc}") from exc
        try:
            record = json.loads(raw)
            text = record["text"]
            if not isinstance(text, str):
                raise TypeError("text field is not a string")
        except (ValueError, KeyError, TypeError):
            logger.warning("evicting corrupt cache entry %s", path.name)
            path.unlink(missing_ok=True)
            return None
        return text

    def put(self, model_id: str, prompt: str, cfg: SamplingConfig, text: str) -> None:
        key = self.key(model_id, prompt, cfg)
        path = self._entry_path(key)
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(f".tmp.{os.getpid()}.{threading.get_ident()}")
            tmp.write_text(
                json.dumps({"model": model_id, "text": text}, ensure_ascii=False),
                "utf-8",
            )
            os.replace(tmp, path)
        except OSError as exc:
            raise CacheIoError(f"cannot write {path}: {exc}") from exc


def cached_generate(
    client: GeneratorClient,
    cache: ResponseCache | None,
    prompt: str,
    cfg: SamplingConfig,
) -> str:
    """Generate through the cache when one is given.

    Cache trouble is never fatal: a failed read or write logs a warning and
    the call falls through to the client.
    """
    if cache is not None:
        try:
            hit = cache.get(client.model_id, prompt, cfg)
        except CacheIoError as exc:
            logger.warning("cache read failed, generating instead: %s", exc)
            hit = None
        if hit is not None:
            return hit
    text = client.generate(prompt, cfg)
    if cache is not None:
        try:
            cache.put(client.model_id, prompt, cfg, text)
        except CacheIoError as exc:
            logger.warning("cache write failed, continuing: %s", exc)
    return text


def feedback_reward(
    table: Table,
    evidence: Evidence,
    query: str,
    reference: str,
    mode: str,
    feedbacker: GeneratorClient,
    *,
    cache: ResponseCache | None = None,
    cfg: SamplingConfig = SEARCH_SAMPLING,
    template: PromptTemplate | None = None,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> float:
    """Score candidate evidence: summarize from it, compare to the reference.

    "subtable" mode keeps only the evidence rows (and requires at least one);
    "highlight" mode shows the whole table with evidence rows starred, which
    with empty evidence degrades to the unmarked table.
    """
    if mode not in REWARD_MODES:
        raise ValueError(f"mode must be one of {REWARD_MODES}, got {mode!r}")
    if mode == "subtable":
        if len(evidence) == 0:
            raise EmptyEvidenceError("subtable mode needs at least one evidence row")
        shown = subtable(table, evidence)
        prompt = build_summarizer_prompt(
            shown, None, query, template=template, token_budget=token_budget
        )
    else:
        prompt = build_summarizer_prompt(
            table, evidence, query, template=template, token_budget=token_budget
        )
    output = cached_generate(feedbacker, cache, prompt.text, cfg)
    return eval_reward(output, reference)
