"""Canonical table/sample data model, validation, and dataset ingestion.

The canonical on-disk format is JSON Lines, one sample per line:

    {"id": str, "title": str, "header": [str], "rows": [[str]],
     "query": str, "reference": str, "evidence": [int] | null}

Evidence indices are 1-based data-row indices; the header is never
indexable. All types here are immutable after construction and safe to
share between workers.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import EvidenceRangeError, RaggedTableError, SchemaError

__all__ = [
    "Row",
    "Table",
    "Evidence",
    "Sample",
    "Dataset",
    "ParseFailure",
    "ParseReport",
    "normalize_cell",
    "parse_sample",
    "serialize_sample",
    "adapt_fetaqa",
    "adapt_qtsumm",
    "load_dataset",
    "save_dataset",
]

# A data row is a plain tuple of cell texts; arity is enforced by Table.
Row = tuple[str, ...]

_FORBIDDEN_CELL_CHARS = ("\t", "\n", "\r")


def normalize_cell(raw: str) -> str:
    """Collapse interior whitespace runs to single spaces and trim."""
    return " ".join(raw.split())


def _check_cell(cell: str, where: str) -> None:
    if any(ch in cell for ch in _FORBIDDEN_CELL_CHARS):
        raise ValueError(f"{where} contains control whitespace: {cell!r}")
    if cell != cell.strip():
        raise ValueError(f"{where} has leading/trailing whitespace: {cell!r}")


@dataclass(frozen=True)
class Table:
    """A titled header plus at least one data row of text cells."""

    header: tuple[str, ...]
    rows: tuple[Row, ...]
    title: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "header", tuple(self.header))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        if len(self.header) < 1:
            raise ValueError("table header must have at least one column")
        if len(self.rows) < 1:
            raise ValueError("table must have at least one data row")
        _check_cell(self.title, "title")
        for cell in self.header:
            _check_cell(cell, "header cell")
        for i, row in enumerate(self.rows, start=1):
            if len(row) != len(self.header):
                raise RaggedTableError(i, expected=len(self.header), got=len(row))
            for cell in row:
                _check_cell(cell, f"row {i} cell")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.header)


@dataclass(frozen=True)
class Evidence:
    """Strictly ascending 1-based data-row indices. May be empty."""

    indices: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        for prev, cur in zip((0,) + self.indices, self.indices):
            if cur < 1:
                raise ValueError(f"evidence index {cur} is not 1-based")
            if cur <= prev:
                raise ValueError(f"evidence indices not strictly ascending: {self.indices}")

    @classmethod
    def from_any(cls, values: Iterable[int]) -> Evidence:
        """Build from any iterable of indices, sorting and deduplicating."""
        return cls(tuple(sorted(set(int(v) for v in values))))

    def union(self, other: Evidence) -> Evidence:
        return Evidence.from_any(self.indices + other.indices)

    def check_range(self, n_rows: int) -> None:
        for i in self.indices:
            if i > n_rows:
                raise EvidenceRangeError(i, n_rows)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __contains__(self, item: object) -> bool:
        return item in self.indices


@dataclass(frozen=True)
class Sample:
    """One dataset record: table, query, and the golden reference output."""

    id: str
    table: Table
    query: str
    reference: str
    manual_evidence: Evidence | None = None
    # Auxiliary source metadata (e.g. upstream cell-coordinate highlights);
    # never consulted by the pipeline, never serialized to the canonical form.
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("sample id must be non-empty")
        if not self.query.strip():
            raise ValueError(f"sample {self.id!r}: query must be non-empty")
        if not self.reference.strip():
            raise ValueError(f"sample {self.id!r}: reference must be non-empty")
        if self.manual_evidence is not None:
            self.manual_evidence.check_range(self.table.n_rows)


@dataclass(frozen=True)
class Dataset:
    """Ordered samples with unique ids; order mirrors the input file."""

    samples: tuple[Sample, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        seen: set[str] = set()
        for s in self.samples:
            if s.id in seen:
                raise ValueError(f"duplicate sample id {s.id!r}")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def by_id(self) -> dict[str, Sample]:
        return {s.id: s for s in self.samples}


@dataclass
class ParseFailure:
    line: int
    message: str


@dataclass
class ParseReport:
    """Per-line failures and warnings collected by a lenient load."""

    failures: list[ParseFailure] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _require(record: Mapping[str, Any], key: str, kind: type | tuple[type, ...]) -> Any:
    if key not in record:
        raise SchemaError(key)
    value = record[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise SchemaError(key, f"field {key!r} has wrong type: {type(value).__name__}")
    return value


def _as_cell(value: Any, key: str) -> str:
    # Upstream formats carry numbers in cells; coerce scalars, reject nests.
    if isinstance(value, bool) or value is None:
        raise SchemaError(key, f"field {key!r} holds a non-text cell: {value!r}")
    if isinstance(value, (str, int, float)):
        return normalize_cell(str(value))
    raise SchemaError(key, f"field {key!r} holds a non-text cell: {value!r}")


def _parse_evidence(raw: Any, n_rows: int, key: str = "evidence") -> Evidence | None:
    if raw is None:
        return None
    if not isinstance(raw, list):
        raise SchemaError(key, f"field {key!r} must be a list of ints or null")
    indices = []
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, int):
            raise SchemaError(key, f"field {key!r} holds a non-integer index: {v!r}")
        if v < 1 or v > n_rows:
            raise EvidenceRangeError(v, n_rows)
        indices.append(v)
    return Evidence.from_any(indices)


def parse_sample(record: Mapping[str, Any]) -> Sample:
    """Parse one canonical-schema record into a validated Sample."""
    sample_id = _require(record, "id", str)
    header_raw = _require(record, "header", list)
    rows_raw = _require(record, "rows", list)
    query = _require(record, "query", str)
    reference = _require(record, "reference", str)
    title = record.get("title", "")
    if not isinstance(title, str):
        raise SchemaError("title", "field 'title' must be a string")

    header = tuple(_as_cell(c, "header") for c in header_raw)
    rows = []
    for i, row in enumerate(rows_raw, start=1):
        if not isinstance(row, list):
            raise SchemaError("rows", f"row {i} is not a list")
        cells = tuple(_as_cell(c, "rows") for c in row)
        if len(cells) != len(header):
            raise RaggedTableError(i, expected=len(header), got=len(cells))
        rows.append(cells)

    try:
        table = Table(header=header, rows=tuple(rows), title=normalize_cell(title))
    except RaggedTableError:
        raise
    except ValueError as exc:
        raise SchemaError("rows", str(exc)) from exc

    evidence = _parse_evidence(record.get("evidence"), table.n_rows)
    meta = record.get("meta", {})
    if not isinstance(meta, dict):
        raise SchemaError("meta", "field 'meta' must be an object")
    return Sample(
        id=sample_id,
        table=table,
        query=query,
        reference=reference,
        manual_evidence=evidence,
        meta=dict(meta),
    )


def serialize_sample(sample: Sample) -> dict[str, Any]:
    """Canonical-schema dict for one sample; inverse of parse_sample."""
    record = {
        "id": sample.id,
        "title": sample.table.title,
        "header": list(sample.table.header),
        "rows": [list(r) for r in sample.table.rows],
        "query": sample.query,
        "reference": sample.reference,
        "evidence": list(sample.manual_evidence) if sample.manual_evidence is not None else None,
    }
    if sample.meta:
        record["meta"] = dict(sample.meta)
    return record


def adapt_fetaqa(record: Mapping[str, Any]) -> Sample:
    """Map a FeTaQA release record onto the canonical Sample.

    The first table-array row is the header. Cell-coordinate highlights,
    when present, are kept in sample.meta and never promoted to evidence:
    the merge set for this corpus is built from search and distillation.
    """
    feta_id = _require(record, "feta_id", (int, str))
    table_array = _require(record, "table_array", list)
    question = _require(record, "question", str)
    answer = _require(record, "answer", str)
    if len(table_array) < 2:
        raise SchemaError("table_array", "table_array needs a header row plus data rows")

    header = tuple(_as_cell(c, "table_array") for c in table_array[0])
    rows = tuple(tuple(_as_cell(c, "table_array") for c in row) for row in table_array[1:])

    title_parts = [
        normalize_cell(str(record.get("table_page_title", "") or "")),
        normalize_cell(str(record.get("table_section_title", "") or "")),
    ]
    title = " - ".join(p for p in title_parts if p)

    meta: dict[str, Any] = {}
    if "highlighted_cell_ids" in record:
        meta["highlighted_cell_ids"] = record["highlighted_cell_ids"]

    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise RaggedTableError(i, expected=len(header), got=len(row))
    return Sample(
        id=str(feta_id),
        table=Table(header=header, rows=rows, title=title),
        query=question,
        reference=answer,
        manual_evidence=None,
        meta=meta,
    )


def adapt_qtsumm(record: Mapping[str, Any]) -> Sample:
    """Map a QTSumm release record onto the canonical Sample.

    Human-annotated relevant rows ride in as manual evidence when the
    record carries them (key "row_ids", 1-based).
    """
    table = _require(record, "table", dict)
    query = _require(record, "query", str)
    summary = _require(record, "summary", str)
    sample_id = record.get("example_id", record.get("id"))
    if sample_id is None or isinstance(sample_id, bool) or not isinstance(sample_id, (int, str)):
        raise SchemaError("example_id")

    header = tuple(_as_cell(c, "table.header") for c in _require(table, "header", list))
    rows = tuple(
        tuple(_as_cell(c, "table.rows") for c in row)
        for row in _require(table, "rows", list)
    )
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise RaggedTableError(i, expected=len(header), got=len(row))
    title = normalize_cell(str(table.get("title", "") or ""))

    built = Table(header=header, rows=rows, title=title)
    evidence = _parse_evidence(record.get("row_ids"), built.n_rows, key="row_ids")
    return Sample(
        id=str(sample_id),
        table=built,
        query=query,
        reference=summary,
        manual_evidence=evidence,
    )


_ADAPTERS = {
    "canonical": parse_sample,
    "fetaqa": adapt_fetaqa,
    "qtsumm": adapt_qtsumm,
}


def load_dataset(
    path: str | Path,
    format: str = "canonical",
    strict: bool = False,
) -> tuple[Dataset, ParseReport]:
    """Load a JSONL dataset, one record per line.

    Lenient mode (default) collects per-line failures in the report and
    keeps going; strict mode re-raises the first failure. Sample order
    follows file order exactly.
    """
    if format not in _ADAPTERS:
        raise SchemaError("format", f"unknown dataset format {format!r}")
    adapt = _ADAPTERS[format]
    report = ParseReport()
    samples: list[Sample] = []
    seen: set[str] = set()

    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise SchemaError("record", f"line {line_no} is not a JSON object")
            sample = adapt(record)
            if sample.id in seen:
                raise SchemaError("id", f"duplicate sample id {sample.id!r}")
        except (SchemaError, RaggedTableError, EvidenceRangeError, ValueError) as exc:
            if strict:
                raise
            report.failures.append(ParseFailure(line_no, str(exc)))
            continue
        seen.add(sample.id)
        samples.append(sample)

    if not samples and not report.failures:
        report.warnings.append(f"{path}: no samples found")
    return Dataset(tuple(samples)), report


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset in the canonical JSONL form."""
    with open(path, "w", encoding="utf-8") as f:
        for sample in dataset:
            f.write(json.dumps(serialize_sample(sample), ensure_ascii=False) + "\n")
