"""Evidence-label construction: greedy search over row subsets, an
exhaustive verification oracle, few-shot distillation, reward-based merging
of label sources, and training-data export.

The greedy search evaluates the n singleton rows first, reorders them by
reward, then accumulates rows one at a time, keeping an addition only when
it strictly improves the reward. That costs exactly 2n feedback evaluations
instead of 2^n.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping

from .errors import (
    MalformedResponseError,
    MissingLabelError,
    NoIndicesError,
    NoTableFoundError,
    PromptTooLongError,
    RateLimitError,
    SchemaError,
    TableTooLargeError,
    TransportError,
)
from .feedback import (
    SEARCH_SAMPLING,
    GeneratorClient,
    ResponseCache,
    SamplingConfig,
    cached_generate,
    feedback_reward,
)
from .prompting import (
    DEFAULT_TOKEN_BUDGET,
    PromptTemplate,
    build_distill_prompt,
    build_highlighter_prompt,
    build_summarizer_prompt,
    format_evidence,
    load_example_blocks,
    parse_evidence_output,
)
from .table_core import Dataset, Evidence, Sample

__all__ = [
    "LabeledSample",
    "SearchCandidate",
    "SearchTrace",
    "distill_labels",
    "distill_one",
    "exhaustive_search",
    "export_highlighter_training",
    "export_summarizer_training",
    "greedy_search",
    "labeled_from_record",
    "labeled_to_record",
    "load_labels",
    "merge_labels",
    "save_labels",
]

# Failures that disqualify one candidate without sinking the whole search.
# Auth failures are fatal: every later call would fail the same way.
_SKIPPABLE_ERRORS = (
    RateLimitError,
    TransportError,
    MalformedResponseError,
    NoTableFoundError,
    PromptTooLongError,
)

MERGE_PRIORITY = ("manual", "distill", "search")


@dataclass(frozen=True)
class SearchCandidate:
    """One evaluated (or skipped) subset in a search trace."""

    evidence: Evidence
    reward: float | None
    phase: str  # "singleton" | "accumulate"
    accepted: bool
    note: str = ""


@dataclass(frozen=True)
class SearchTrace:
    """Everything the greedy search looked at, in evaluation order."""

    candidates: tuple[SearchCandidate, ...]
    oracle_calls: int
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class LabeledSample:
    """Evidence labels for one sample, by source, plus the merge result."""

    sample_id: str
    e_search: Evidence | None = None
    e_distill: Evidence | None = None
    e_manual: Evidence | None = None
    e_merge: Evidence | None = None
    merge_rewards: tuple[tuple[str, float], ...] = ()
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.sample_id:
            raise ValueError("sample_id must be non-empty")
        candidates = self.candidates()
        if self.e_merge is not None and candidates:
            if self.e_merge not in candidates.values():
                raise ValueError(
                    f"e_merge for {self.sample_id!r} matches no label source"
                )

    def candidates(self) -> dict[str, Evidence]:
        """Present label sources in merge-priority order."""
        pairs = (
            ("manual", self.e_manual),
            ("distill", self.e_distill),
            ("search", self.e_search),
        )
        return {name: ev for name, ev in pairs if ev is not None}


def _evaluate_with_retry(
    sample: Sample,
    evidence: Evidence,
    feedbacker: GeneratorClient,
    cache: ResponseCache | None,
    cfg: SamplingConfig,
    template: PromptTemplate | None,
    token_budget: int,
) -> tuple[float | None, str]:
    """(reward, note). A transient failure is retried once, then skipped."""
    for attempt in (1, 2):
        try:
            reward = feedback_reward(
                sample.table,
                evidence,
                sample.query,
                sample.reference,
                "subtable",
                feedbacker,
                cache=cache,
                cfg=cfg,
                template=template,
                token_budget=token_budget,
            )
            return reward, ""
        except _SKIPPABLE_ERRORS as exc:
            if attempt == 2:
                return None, f"skipped after retry: {exc}"
    raise AssertionError("unreachable")


def greedy_search(
    sample: Sample,
    feedbacker: GeneratorClient,
    *,
    cache: ResponseCache | None = None,
    cfg: SamplingConfig = SEARCH_SAMPLING,
    step_cap: int | None = None,
    fallback: bool = True,
    template: PromptTemplate | None = None,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> tuple[Evidence, float, SearchTrace]:
    """Search evidence rows greedily, spending two evaluations per row.

    Phase 1 scores each singleton sub-table. Phase 2 walks the singletons in
    descending-reward order (ties: ascending row index) and grows the result
    set, accepting an addition only on strict reward improvement. `step_cap`
    bounds the number of accepted additions. If nothing is ever accepted and
    `fallback` is set, the best singleton is returned and flagged.
    """
    n = sample.table.n_rows
    candidates: list[SearchCandidate] = []
    flags: list[str] = []
    calls = 0

    def evaluate(evidence: Evidence) -> tuple[float | None, str]:
        nonlocal calls
        reward, note = _evaluate_with_retry(
            sample, evidence, feedbacker, cache, cfg, template, token_budget
        )
        if reward is not None:
            calls += 1
        return reward, note

    singles: list[tuple[float, int]] = []
    for i in range(1, n + 1):
        evidence = Evidence((i,))
        reward, note = evaluate(evidence)
        candidates.append(SearchCandidate(evidence, reward, "singleton", False, note))
        if reward is not None:
            singles.append((reward, i))
    singles.sort(key=lambda pair: (-pair[0], pair[1]))

    held: tuple[int, ...] = ()
    held_reward = 0.0
    accepted_count = 0
    for _, row in singles:
        if step_cap is not None and accepted_count >= step_cap:
            flags.append("step_cap_reached")
            break
        evidence = Evidence(tuple(sorted(set(held) | {row})))
        reward, note = evaluate(evidence)
        if reward is None:
            candidates.append(
                SearchCandidate(evidence, None, "accumulate", False, note)
            )
            continue
        accepted = reward > held_reward
        candidates.append(SearchCandidate(evidence, reward, "accumulate", accepted))
        if accepted:
            held = evidence.indices
            held_reward = reward
            accepted_count += 1

    if held:
        result, result_reward = Evidence(held), held_reward
    elif fallback and singles:
        top_reward, top_row = singles[0]
        result, result_reward = Evidence((top_row,)), top_reward
        flags.append("fallback_top_singleton")
    else:
        result, result_reward = Evidence(()), 0.0
        flags.append("no_usable_candidates")

    trace = SearchTrace(tuple(candidates), calls, tuple(flags))
    return result, result_reward, trace


def exhaustive_search(
    sample: Sample,
    feedbacker: GeneratorClient,
    n_max: int = 12,
    *,
    cache: ResponseCache | None = None,
    cfg: SamplingConfig = SEARCH_SAMPLING,
    template: PromptTemplate | None = None,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> tuple[Evidence, float]:
    """Evaluate every non-empty row subset; the verification oracle.

    Returns the lexicographically smallest argmax. Cost is 2^n - 1
    evaluations, so tables beyond `n_max` rows are refused.
    """
    n = sample.table.n_rows
    if n > n_max:
        raise TableTooLargeError(n, n_max)
    subsets = sorted(
        itertools.chain.from_iterable(
            itertools.combinations(range(1, n + 1), size) for size in range(1, n + 1)
        )
    )
    best_evidence: Evidence | None = None
    best_reward = -1.0
    for indices in subsets:
        evidence = Evidence(indices)
        reward = feedback_reward(
            sample.table,
            evidence,
            sample.query,
            sample.reference,
            "subtable",
            feedbacker,
            cache=cache,
            cfg=cfg,
            template=template,
            token_budget=token_budget,
        )
        if reward > best_reward:
            best_evidence, best_reward = evidence, reward
    assert best_evidence is not None
    return best_evidence, best_reward


def distill_one(
    sample: Sample,
    client: GeneratorClient,
    examples: tuple[str, ...],
    *,
    cache: ResponseCache | None = None,
    cfg: SamplingConfig = SEARCH_SAMPLING,
    template: PromptTemplate | None = None,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> tuple[LabeledSample, list[str]]:
    """Distill one sample's evidence from a model; never raises on parse or
    transient generation trouble, reporting it instead (e_distill absent)."""
    base = LabeledSample(sample_id=sample.id, e_manual=sample.manual_evidence)
    try:
        prompt = build_distill_prompt(
            sample.table,
            sample.query,
            sample.reference,
            examples,
            template=template,
            sample_id=sample.id,
            token_budget=token_budget,
        )
        raw = cached_generate(client, cache, prompt.text, cfg)
        evidence, warnings = parse_evidence_output(raw, sample.table.n_rows)
    except (NoIndicesError, PromptTooLongError) as exc:
        return base, [f"{sample.id}: {exc}"]
    except _SKIPPABLE_ERRORS as exc:
        return base, [f"{sample.id}: generation failed: {exc}"]
    return replace(base, e_distill=evidence), [f"{sample.id}: {w}" for w in warnings]


def distill_labels(
    dataset: Dataset,
    client: GeneratorClient,
    *,
    cache: ResponseCache | None = None,
    cfg: SamplingConfig = SEARCH_SAMPLING,
    template: PromptTemplate | None = None,
    examples: tuple[str, ...] | None = None,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> tuple[list[LabeledSample], list[str]]:
    """Ask a model which rows support each reference answer.

    Returns labels in dataset order plus a report of per-sample problems.
    A sample whose output cannot be parsed (or whose generation fails on a
    transient error) gets no e_distill and a report entry; the job continues.
    """
    if examples is None:
        examples = load_example_blocks()
    labels: list[LabeledSample] = []
    report: list[str] = []
    for sample in dataset:
        labeled, notes = distill_one(
            sample,
            client,
            examples,
            cache=cache,
            cfg=cfg,
            template=template,
            token_budget=token_budget,
        )
        labels.append(labeled)
        report.extend(notes)
    return labels, report


def merge_labels(
    labeled: LabeledSample,
    sample: Sample,
    feedbacker: GeneratorClient,
    *,
    cache: ResponseCache | None = None,
    cfg: SamplingConfig = SEARCH_SAMPLING,
    template: PromptTemplate | None = None,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> LabeledSample:
    """Pick the best label source by reward on the highlighted full table.

    Identical candidate sets are evaluated once. Ties go to the earlier
    source in manual > distill > search order. A single candidate wins
    outright, with no evaluation at all.
    """
    candidates = labeled.candidates()
    if not candidates:
        raise MissingLabelError(labeled.sample_id, "any")
    if len(candidates) == 1:
        (evidence,) = candidates.values()
        return replace(labeled, e_merge=evidence)
    distinct: dict[Evidence, float] = {}
    for evidence in candidates.values():
        if evidence not in distinct:
            distinct[evidence] = feedback_reward(
                sample.table,
                evidence,
                sample.query,
                sample.reference,
                "highlight",
                feedbacker,
                cache=cache,
                cfg=cfg,
                template=template,
                token_budget=token_budget,
            )
    rewards = tuple((name, distinct[ev]) for name, ev in candidates.items())
    best_name, best_evidence, best_reward = "", None, -1.0
    for name, evidence in candidates.items():
        reward = distinct[evidence]
        if reward > best_reward:
            best_name, best_evidence, best_reward = name, evidence, reward
    assert best_evidence is not None
    return replace(labeled, e_merge=best_evidence, merge_rewards=rewards)


def labeled_to_record(labeled: LabeledSample) -> dict[str, object]:
    def enc(evidence: Evidence | None) -> list[int] | None:
        return list(evidence.indices) if evidence is not None else None

    return {
        "id": labeled.sample_id,
        "e_search": enc(labeled.e_search),
        "e_distill": enc(labeled.e_distill),
        "e_manual": enc(labeled.e_manual),
        "e_merge": enc(labeled.e_merge),
        "rewards": dict(labeled.merge_rewards),
        "flags": list(labeled.flags),
    }


def labeled_from_record(record: dict[str, object]) -> LabeledSample:
    if not isinstance(record, dict):
        raise SchemaError("record", "label record must be an object")
    raw_id = record.get("id")
    if not isinstance(raw_id, str) or not raw_id:
        raise SchemaError("id", "label record needs a non-empty string id")

    def dec(key: str) -> Evidence | None:
        raw = record.get(key)
        if raw is None:
            return None
        if not isinstance(raw, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in raw
        ):
            raise SchemaError(key, f"{key} must be null or a list of integers")
        return Evidence.from_any(raw)

    raw_rewards = record.get("rewards", {})
    if not isinstance(raw_rewards, dict):
        raise SchemaError("rewards", "rewards must be an object")
    rewards = []
    for name, value in raw_rewards.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SchemaError("rewards", f"reward for {name!r} must be a number")
        rewards.append((str(name), float(value)))
    raw_flags = record.get("flags", [])
    if not isinstance(raw_flags, list) or not all(
        isinstance(f, str) for f in raw_flags
    ):
        raise SchemaError("flags", "flags must be a list of strings")
    return LabeledSample(
        sample_id=raw_id,
        e_search=dec("e_search"),
        e_distill=dec("e_distill"),
        e_manual=dec("e_manual"),
        e_merge=dec("e_merge"),
        merge_rewards=tuple(rewards),
        flags=tuple(raw_flags),
    )


def save_labels(
    path: str | Path, labels: Iterable[LabeledSample], append: bool = False
) -> None:
    """Write labels as JSONL, one record per sample."""
    mode = "a" if append else "w"
    with open(path, mode, encoding="utf-8") as handle:
        for labeled in labels:
            handle.write(json.dumps(labeled_to_record(labeled), ensure_ascii=False))
            handle.write("\n")


def load_labels(path: str | Path) -> dict[str, LabeledSample]:
    """Read a label file; on duplicate ids the last record wins (resume)."""
    labels: dict[str, LabeledSample] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except ValueError as exc:
                raise SchemaError("line", f"line {line_no} is not JSON: {exc}") from exc
            labeled = labeled_from_record(record)
            labels[labeled.sample_id] = labeled
    return labels


def export_highlighter_training(
    dataset: Dataset,
    labels: Mapping[str, LabeledSample],
    path: str | Path,
    *,
    strict: bool = True,
    template: PromptTemplate | None = None,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> int:
    """Write highlighter tuning records: blank prompt plus index-set completion.

    The full training string for a record is prompt + completion, which ends
    "###Output\\n{i, ...}". Records follow dataset order. Samples without a
    merged label raise in strict mode and are skipped otherwise.
    """
    written = 0
    with open(path, "w", encoding="utf-8") as handle:
        for sample in dataset:
            labeled = labels.get(sample.id)
            if labeled is None or labeled.e_merge is None:
                if strict:
                    raise MissingLabelError(sample.id, "merge")
                continue
            prompt = build_highlighter_prompt(
                sample.table,
                sample.query,
                None,
                template=template,
                sample_id=sample.id,
                token_budget=token_budget,
            )
            record = {
                "prompt": prompt.text,
                "completion": format_evidence(labeled.e_merge),
            }
            handle.write(json.dumps(record, ensure_ascii=False))
            handle.write("\n")
            written += 1
    return written


def export_summarizer_training(
    dataset: Dataset,
    labels: Mapping[str, LabeledSample],
    path: str | Path,
    *,
    source: str = "merge",
    strict: bool = True,
    template: PromptTemplate | None = None,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> int:
    """Write summarizer tuning records: highlighted-table prompt, reference
    completion. `source` picks which evidence marks the table ("merge" or
    "distill")."""
    if source not in ("merge", "distill"):
        raise ValueError(f"source must be 'merge' or 'distill', got {source!r}")
    written = 0
    with open(path, "w", encoding="utf-8") as handle:
        for sample in dataset:
            labeled = labels.get(sample.id)
            evidence = None
            if labeled is not None:
                evidence = labeled.e_merge if source == "merge" else labeled.e_distill
            if evidence is None:
                if strict:
                    raise MissingLabelError(sample.id, source)
                continue
            prompt = build_summarizer_prompt(
                sample.table,
                evidence,
                sample.query,
                None,
                template=template,
                sample_id=sample.id,
                token_budget=token_budget,
            )
            record = {"prompt": prompt.text, "completion": sample.reference}
            handle.write(json.dumps(record, ensure_ascii=False))
            handle.write("\n")
            written += 1
    return written
