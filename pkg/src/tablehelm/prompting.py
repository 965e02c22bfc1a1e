"""Prompt construction for the highlighter, summarizer, and distillation
roles, plus the parser that turns highlighter output back into Evidence.

Templates are plain text files with slot markers ({{TABLE}}, {{QUERY}},
{{REFERENCE}}, {{EXAMPLES}}) and a single literal "###Output" line at the
end. Rendering substitutes slots in one pass, then appends the completion
(golden evidence or reference in training mode, nothing at inference), so
an inference prompt always ends with "###Output\n". Every interpolated
value has runs of '#' capped, which keeps "###Output" unique per prompt.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import NoIndicesError, PromptTooLongError, TemplateError
from .table_core import Evidence, Table
from .transforms import cap_hash_runs, highlight, linearize

__all__ = [
    "OUTPUT_MARKER",
    "DEFAULT_TOKEN_BUDGET",
    "PromptTemplate",
    "RenderedPrompt",
    "build_distill_prompt",
    "build_highlighter_prompt",
    "build_summarizer_prompt",
    "estimate_tokens",
    "format_evidence",
    "load_example_blocks",
    "load_template",
    "parse_evidence_output",
]

OUTPUT_MARKER = "###Output"
DEFAULT_TOKEN_BUDGET = 2048
EXAMPLE_SEPARATOR = "---"

ROLES = ("highlighter", "summarizer", "distill")

_ROLE_SLOTS: dict[str, tuple[str, ...]] = {
    "highlighter": ("TABLE", "QUERY"),
    "summarizer": ("TABLE", "QUERY"),
    "distill": ("EXAMPLES", "TABLE", "QUERY", "REFERENCE"),
}

_SLOT_RE = re.compile(r"\{\{(TABLE|QUERY|REFERENCE|EXAMPLES)\}\}")
_INT_RE = re.compile(r"\d+")


@dataclass(frozen=True)
class PromptTemplate:
    """One role's template text, validated at construction."""

    name: str
    text: str
    example_blocks: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.name not in ROLES:
            raise TemplateError(f"unknown template role: {self.name!r}")
        if self.text.count(OUTPUT_MARKER) != 1:
            raise TemplateError(
                f"{self.name} template must contain exactly one {OUTPUT_MARKER!r}"
            )
        head, _, tail = self.text.partition(OUTPUT_MARKER)
        if tail.strip():
            raise TemplateError(
                f"{self.name} template has content after {OUTPUT_MARKER!r}"
            )
        declared = _ROLE_SLOTS[self.name]
        found = [m.group(1) for m in _SLOT_RE.finditer(head)]
        for slot in declared:
            if found.count(slot) != 1:
                raise TemplateError(
                    f"{self.name} template must use {{{{{slot}}}}} exactly once"
                )
        for slot in found:
            if slot not in declared:
                raise TemplateError(
                    f"{self.name} template does not take {{{{{slot}}}}}"
                )
        if self.example_blocks and self.name != "distill":
            raise TemplateError("example blocks are only used by the distill role")
        for block in self.example_blocks:
            if OUTPUT_MARKER in block:
                raise TemplateError(
                    f"example block may not contain {OUTPUT_MARKER!r}"
                )
        # Normalized form: head, marker, single trailing newline.
        object.__setattr__(self, "text", head + OUTPUT_MARKER + "\n")


@dataclass(frozen=True)
class RenderedPrompt:
    """A fully assembled prompt string for one sample and role."""

    text: str
    role: str
    sample_id: str = ""

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise TemplateError(f"unknown prompt role: {self.role!r}")
        if self.text.count(OUTPUT_MARKER) != 1:
            raise TemplateError(f"prompt must contain exactly one {OUTPUT_MARKER!r}")


def _read_packaged(filename: str) -> str:
    return (
        resources.files("tablehelm").joinpath("templates", filename).read_text("utf-8")
    )


def load_template(role: str, path: str | None = None) -> PromptTemplate:
    """Load a role's template from `path`, or the packaged default."""
    if role not in ROLES:
        raise TemplateError(f"unknown template role: {role!r}")
    if path is None:
        return _packaged_template(role)
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    return PromptTemplate(name=role, text=text)


@lru_cache(maxsize=None)
def _packaged_template(role: str) -> PromptTemplate:
    # Packaged defaults are immutable, so one parse per process is enough.
    return PromptTemplate(name=role, text=_read_packaged(f"{role}.txt"))


def load_example_blocks(path: str | None = None) -> tuple[str, ...]:
    """Few-shot blocks for the distill prompt, separated by '---' lines."""
    if path is None:
        text = _read_packaged("distill_examples.txt")
    else:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    blocks = []
    current: list[str] = []
    for line in text.splitlines():
        if line.strip() == EXAMPLE_SEPARATOR:
            blocks.append("\n".join(current).strip("\n"))
            current = []
        else:
            current.append(line)
    blocks.append("\n".join(current).strip("\n"))
    blocks = [b for b in blocks if b]
    if not blocks:
        raise TemplateError(f"no example blocks found in {path or 'default file'}")
    return tuple(blocks)


def estimate_tokens(text: str) -> int:
    """Crude length estimate: one token per four characters."""
    return math.ceil(len(text) / 4)


def format_evidence(evidence: Evidence) -> str:
    """Render evidence as the prompt set literal, e.g. "{1, 3}"."""
    return "{" + ", ".join(str(i) for i in evidence) + "}"


def _assemble(
    template: PromptTemplate,
    values: dict[str, str],
    completion: str,
    role: str,
    sample_id: str,
    token_budget: int,
) -> RenderedPrompt:
    safe = {slot: cap_hash_runs(value) for slot, value in values.items()}
    head = _SLOT_RE.sub(lambda m: safe[m.group(1)], template.text)
    text = head + cap_hash_runs(completion)
    estimate = estimate_tokens(text)
    if estimate > token_budget:
        raise PromptTooLongError(estimate, token_budget)
    return RenderedPrompt(text=text, role=role, sample_id=sample_id)


def build_highlighter_prompt(
    table: Table,
    query: str,
    golden_evidence: Evidence | None = None,
    *,
    template: PromptTemplate | None = None,
    sample_id: str = "",
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> RenderedPrompt:
    """Prompt asking for evidence row indices.

    With `golden_evidence` the rendered index set follows the output marker
    (training form); without it the output area is left blank (inference).
    """
    if template is None:
        template = load_template("highlighter")
    completion = ""
    if golden_evidence is not None:
        golden_evidence.check_range(table.n_rows)
        completion = format_evidence(golden_evidence)
    values = {"TABLE": linearize(table).text, "QUERY": query}
    return _assemble(template, values, completion, "highlighter", sample_id, token_budget)


def build_summarizer_prompt(
    table: Table,
    evidence: Evidence | None,
    query: str,
    reference: str | None = None,
    *,
    template: PromptTemplate | None = None,
    sample_id: str = "",
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> RenderedPrompt:
    """Prompt asking for the answer sentence.

    `evidence` marks rows via highlighting before linearization; None leaves
    the table unmarked (either the no-highlight ablation or an input that was
    already reduced to a subtable). `reference` fills the output area in
    training mode.
    """
    if template is None:
        template = load_template("summarizer")
    shown = table if evidence is None else highlight(table, evidence)
    values = {"TABLE": linearize(shown).text, "QUERY": query}
    completion = reference if reference is not None else ""
    return _assemble(template, values, completion, "summarizer", sample_id, token_budget)


def build_distill_prompt(
    table: Table,
    query: str,
    reference: str,
    examples: tuple[str, ...] | list[str],
    *,
    template: PromptTemplate | None = None,
    sample_id: str = "",
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> RenderedPrompt:
    """Few-shot prompt asking which rows support a given reference answer.

    The reference is part of the prompt body here; the output area is left
    blank for the model's evidence indices.
    """
    if template is None:
        template = load_template("distill")
    if not examples:
        raise TemplateError("distill prompt needs at least one example block")
    for block in examples:
        if OUTPUT_MARKER in block:
            raise TemplateError(f"example block may not contain {OUTPUT_MARKER!r}")
    values = {
        "EXAMPLES": "\n\n".join(examples),
        "TABLE": linearize(table).text,
        "QUERY": query,
        "REFERENCE": reference,
    }
    return _assemble(template, values, "", "distill", sample_id, token_budget)


def parse_evidence_output(raw: str, n_rows: int) -> tuple[Evidence, list[str]]:
    """Recover row indices from highlighter output text.

    All decimal integers are extracted in order and deduplicated; values
    outside [1, n_rows] are dropped with one warning each. The literal empty
    set "{}" parses as empty Evidence; any other text without an integer
    raises NoIndicesError.
    """
    if n_rows < 1:
        raise ValueError("n_rows must be at least 1")
    values = [int(m.group()) for m in _INT_RE.finditer(raw)]
    if not values:
        if "{}" in raw:
            return Evidence(()), []
        raise NoIndicesError(f"no row indices in output: {raw!r}")
    warnings: list[str] = []
    kept: list[int] = []
    seen: set[int] = set()
    for value in values:
        if value in seen:
            continue
        seen.add(value)
        if not 1 <= value <= n_rows:
            warnings.append(f"index {value} out of range for a {n_rows}-row table")
            continue
        kept.append(value)
    return Evidence(tuple(sorted(kept))), warnings
