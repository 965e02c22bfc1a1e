#!/usr/bin/env python3
"""Regenerate the frozen prompt goldens under tests/goldens/.

Run from the repository root after any deliberate template or rendering
change, then review the diff before committing the new files.
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

import support  # noqa: E402
from tablehelm.prompting import (  # noqa: E402
    build_distill_prompt,
    build_highlighter_prompt,
    build_summarizer_prompt,
    load_example_blocks,
)
from tablehelm.table_core import Evidence  # noqa: E402
from tablehelm.transforms import subtable  # noqa: E402


def main() -> None:
    out_dir = ROOT / "tests" / "goldens"
    out_dir.mkdir(parents=True, exist_ok=True)
    sample = support.champions_sample()
    table = sample.table
    evidence = Evidence((2,))

    goldens = {
        "highlighter_train": build_highlighter_prompt(
            table, sample.query, evidence, sample_id=sample.id
        ),
        "highlighter_inference": build_highlighter_prompt(
            table, sample.query, sample_id=sample.id
        ),
        "summarizer_full": build_summarizer_prompt(
            table, evidence, sample.query, sample.reference, sample_id=sample.id
        ),
        "summarizer_no_highlight": build_summarizer_prompt(
            table, None, sample.query, sample_id=sample.id
        ),
        "summarizer_subtab": build_summarizer_prompt(
            subtable(table, evidence), None, sample.query, sample_id=sample.id
        ),
        "distill": build_distill_prompt(
            table,
            sample.query,
            sample.reference,
            load_example_blocks(),
            sample_id=sample.id,
        ),
    }
    for name, prompt in goldens.items():
        path = out_dir / f"{name}.txt"
        path.write_text(prompt.text, encoding="utf-8")
        print(f"wrote {path.relative_to(ROOT)} ({len(prompt.text)} bytes)")


if __name__ == "__main__":
    main()
