"""Regenerate data/toy.jsonl: ten small tables with planted evidence rows.

Each sample's reference is exactly the space-joined cells of its planted
rows, every cell in a table is a unique single word, and the planted set is
recorded in meta. Under the offline echo oracle this makes the best row
subset unambiguous, which is what the label-search tests and the toy
pipeline demo rely on. Four samples also carry manual evidence equal to the
planted set.

Usage: python scripts/make_toy_dataset.py [output_path]
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from tablehelm.table_core import Evidence, Sample, Table, serialize_sample

WORDS = [
    "amber", "basil", "cedar", "delta", "ember", "fjord", "grove", "heath",
    "iris", "juniper", "kelp", "larch", "maple", "nettle", "oak", "pine",
    "quartz", "rowan", "sage", "thistle", "umber", "violet", "willow", "yarrow",
    "aspen", "birch", "clover", "dahlia", "elm", "fern", "garnet", "hazel",
    "indigo", "jasper", "kale", "lotus", "moss", "nutmeg", "olive", "peony",
    "reed", "sorrel", "tulip", "vetch", "wren", "zinnia", "alder", "briar",
    "cress", "dill", "elder", "flax", "gorse", "holly", "ivy", "juniper2",
    "laurel", "mint", "nettle2", "osier", "poplar", "rush", "sedge", "teak",
    "vine", "walnut", "yew", "acacia", "bramble", "catkin", "durian", "eucalypt",
    "fennel", "ginkgo", "hawthorn", "inula", "jade", "kapok", "lilac", "madrone",
]

# (id, n_rows, n_cols, planted rows, has manual evidence)
PLAN = [
    ("toy-01", 3, 2, (1,), False),
    ("toy-02", 4, 2, (2,), False),
    ("toy-03", 5, 2, (1, 3), False),
    ("toy-04", 3, 3, (3,), False),
    ("toy-05", 5, 2, (2, 4), False),
    ("toy-06", 4, 2, (1,), True),
    ("toy-07", 4, 2, (1, 2), True),
    ("toy-08", 6, 2, (4,), True),
    ("toy-09", 3, 2, (2,), True),
    ("toy-10", 6, 2, (1, 3, 5), False),
]

HEADERS = {2: ("name", "kind"), 3: ("name", "kind", "note")}


def build_samples() -> list[Sample]:
    samples = []
    pool = iter(WORDS * 4)
    for sample_id, n_rows, n_cols, planted, manual in PLAN:
        rows = tuple(
            tuple(f"{next(pool)}{sample_id[-2:]}r{r}c{c}" for c in range(n_cols))
            for r in range(n_rows)
        )
        table = Table(header=HEADERS[n_cols], rows=rows, title=f"fixture {sample_id}")
        reference = " ".join(" ".join(rows[i - 1]) for i in planted)
        samples.append(
            Sample(
                id=sample_id,
                table=table,
                query=f"Which rows support the note for {sample_id}?",
                reference=reference,
                manual_evidence=Evidence(planted) if manual else None,
                meta={"planted": list(planted)},
            )
        )
    return samples


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data/toy.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as handle:
        for sample in build_samples():
            handle.write(json.dumps(serialize_sample(sample), ensure_ascii=False) + "\n")
    print(f"wrote {len(PLAN)} samples -> {out}")


if __name__ == "__main__":
    main()
