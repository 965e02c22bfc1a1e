"""Operator commands: ingest, search-labels, distill-labels, merge-labels,
highlight, export-train, pipeline, evaluate.

Batch commands share one pattern: samples fan out over a thread pool, while
results are written from the main thread in dataset order, one full line at
a time, to id-keyed JSONL files. Reruns skip ids already present in the
output, so an interrupted job resumes where it stopped (with a warm response
cache, finished work costs nothing to skip past).

Exit codes: 0 success, 2 validation problem, 3 backend/transport failure,
4 finished but with a success rate below the configured threshold.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields, replace
from pathlib import Path
from typing import Callable, Iterator, TypeVar

from .config import RunConfig, build_config
from .errors import (
    BACKEND_ERRORS,
    AuthError,
    EmptyEvidenceError,
    NoIndicesError,
    SchemaError,
    TableHelmError,
    TransportError,
    UnmatchedIdError,
)
from .evidence_lab import (
    LabeledSample,
    distill_one,
    export_highlighter_training,
    export_summarizer_training,
    greedy_search,
    labeled_to_record,
    load_labels,
    merge_labels,
)
from .feedback import (
    CountingClient,
    EchoClient,
    FixedClient,
    GeneratorClient,
    HttpClient,
    ResponseCache,
    SamplingConfig,
    cached_generate,
)
from .metrics import corpus_evaluate
from .prompting import (
    PromptTemplate,
    build_highlighter_prompt,
    build_summarizer_prompt,
    load_example_blocks,
    load_template,
    parse_evidence_output,
)
from .table_core import Dataset, Evidence, Sample, load_dataset, save_dataset
from .transforms import highlight, linearize, subtable

__all__ = ["main"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BACKEND = 3
EXIT_PARTIAL = 4

T = TypeVar("T")
R = TypeVar("R")


def make_client(endpoint: str, model_id: str, run: RunConfig) -> GeneratorClient:
    """Build a generator from an endpoint spec.

    "echo" is the offline table-reading oracle, "fixed:<text>" always
    returns <text>, and http(s) URLs get the chat-completions client.
    """
    if endpoint == "echo":
        return EchoClient()
    if endpoint.startswith("fixed:"):
        return FixedClient(endpoint[len("fixed:") :])
    if endpoint.startswith(("http://", "https://")):
        return HttpClient(
            endpoint,
            model_id,
            timeout=run.timeout,
            max_attempts=run.max_attempts,
            max_in_flight=run.max_in_flight,
        )
    raise SchemaError("endpoint", f"unsupported endpoint: {endpoint!r}")


def cache_for(run: RunConfig) -> ResponseCache | None:
    return ResponseCache(run.cache_dir) if run.cache_dir else None


def sampling_for(role: str, run: RunConfig) -> SamplingConfig:
    return SamplingConfig(
        nucleus_p=getattr(run, f"{role}_nucleus_p"),
        temperature=getattr(run, f"{role}_temperature"),
        max_new_tokens=run.max_new_tokens,
    )


def template_for(role: str, run: RunConfig) -> PromptTemplate:
    path = getattr(run, f"{role}_template")
    return load_template(role, path or None)


def existing_ids(path: str | Path) -> set[str]:
    """Ids already present in an output file (resume support)."""
    target = Path(path)
    if not target.exists():
        return set()
    ids: set[str] = set()
    with open(target, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except ValueError:
                continue
            sample_id = record.get("id") if isinstance(record, dict) else None
            if isinstance(sample_id, str):
                ids.add(sample_id)
    return ids


def map_ordered(
    fn: Callable[[T], R], items: list[T], workers: int
) -> Iterator[tuple[T, R | None, Exception | None]]:
    """Run fn over items in a pool, yielding results in input order.

    Per-item exceptions are yielded, not raised, except AuthError, which
    aborts the whole job: every subsequent call would fail identically.
    """
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, item) for item in items]
        for item, future in zip(items, futures):
            try:
                yield item, future.result(), None
            except AuthError:
                for pending in futures:
                    pending.cancel()
                raise
            except Exception as exc:
                yield item, None, exc


def _load_input(path: str, run: RunConfig) -> Dataset:
    dataset, _ = load_dataset(path, format=run.dataset_format, strict=True)
    return dataset


def _job_exit(
    succeeded: int,
    total: int,
    failures: list[tuple[str, Exception]],
    run: RunConfig,
) -> int:
    for sample_id, exc in failures:
        print(f"failed {sample_id}: {exc}", file=sys.stderr)
    if total == 0:
        return EXIT_OK
    if succeeded == 0 and failures and all(
        isinstance(exc, BACKEND_ERRORS) for _, exc in failures
    ):
        return EXIT_BACKEND
    if succeeded / total >= run.success_threshold:
        return EXIT_OK
    return EXIT_PARTIAL


def _parse_flag_evidence(raw: str) -> Evidence:
    try:
        return Evidence.from_any(int(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise SchemaError("evidence", f"bad evidence spec {raw!r}: {exc}") from exc


# ---------------------------------------------------------------- commands


def cmd_ingest(args: argparse.Namespace) -> int:
    dataset, report = load_dataset(args.input, format=args.format, strict=args.strict)
    for failure in report.failures:
        print(f"line {failure.line}: {failure.message}", file=sys.stderr)
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    save_dataset(dataset, args.output)
    print(f"ingested {len(dataset)} samples -> {args.output}")
    if len(dataset) == 0:
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_search_labels(args: argparse.Namespace) -> int:
    run = _run_config(args)
    dataset = _load_input(args.input, run)
    feedbacker = CountingClient(
        make_client(run.feedbacker_endpoint, run.feedbacker_model, run)
    )
    cache = cache_for(run)
    cfg = sampling_for("feedbacker", run)
    template = template_for("summarizer", run)
    done = existing_ids(args.output)
    todo = [s for s in dataset if s.id not in done]

    def work(sample: Sample):
        evidence, reward, trace = greedy_search(
            sample,
            feedbacker,
            cache=cache,
            cfg=cfg,
            step_cap=run.step_cap_or_none,
            fallback=run.search_fallback,
            template=template,
            token_budget=run.token_budget,
        )
        if "no_usable_candidates" in trace.flags:
            raise TransportError(f"every candidate evaluation failed for {sample.id}")
        return evidence, reward, trace

    succeeded = 0
    failures: list[tuple[str, Exception]] = []
    oracle_total = 0
    trace_handle = open(args.trace, "a", encoding="utf-8") if args.trace else None
    try:
        with open(args.output, "a", encoding="utf-8") as out:
            for sample, result, exc in map_ordered(work, todo, run.workers):
                if exc is not None:
                    failures.append((sample.id, exc))
                    continue
                evidence, reward, trace = result
                oracle_total += trace.oracle_calls
                labeled = LabeledSample(
                    sample_id=sample.id,
                    e_search=evidence,
                    e_manual=sample.manual_evidence,
                    merge_rewards=(("search", reward),),
                    flags=trace.flags,
                )
                out.write(json.dumps(labeled_to_record(labeled), ensure_ascii=False))
                out.write("\n")
                out.flush()
                if trace_handle is not None:
                    trace_handle.write(
                        json.dumps(_trace_record(sample.id, trace), ensure_ascii=False)
                    )
                    trace_handle.write("\n")
                    trace_handle.flush()
                succeeded += 1
    finally:
        if trace_handle is not None:
            trace_handle.close()
    print(
        f"searched {succeeded}/{len(todo)} samples"
        f" (skipped {len(done)} already labeled);"
        f" oracle evaluations {oracle_total}, generator calls {feedbacker.calls}"
    )
    return _job_exit(succeeded, len(todo), failures, run)


def _trace_record(sample_id: str, trace) -> dict[str, object]:
    return {
        "id": sample_id,
        "oracle_calls": trace.oracle_calls,
        "flags": list(trace.flags),
        "candidates": [
            {
                "evidence": list(c.evidence.indices),
                "reward": c.reward,
                "phase": c.phase,
                "accepted": c.accepted,
                "note": c.note,
            }
            for c in trace.candidates
        ],
    }


def cmd_distill_labels(args: argparse.Namespace) -> int:
    run = _run_config(args)
    dataset = _load_input(args.input, run)
    endpoint = run.distill_endpoint or run.feedbacker_endpoint
    client = CountingClient(make_client(endpoint, run.distill_model, run))
    cache = cache_for(run)
    cfg = sampling_for("feedbacker", run)
    template = template_for("distill", run)
    examples = load_example_blocks(run.distill_examples or None)
    done = existing_ids(args.output)
    todo = [s for s in dataset if s.id not in done]

    def work(sample: Sample):
        return distill_one(
            sample,
            client,
            examples,
            cache=cache,
            cfg=cfg,
            template=template,
            token_budget=run.token_budget,
        )

    parsed = 0
    written = 0
    failures: list[tuple[str, Exception]] = []
    with open(args.output, "a", encoding="utf-8") as out:
        for sample, result, exc in map_ordered(work, todo, run.workers):
            if exc is not None:
                failures.append((sample.id, exc))
                continue
            labeled, notes = result
            for note in notes:
                print(note, file=sys.stderr)
            out.write(json.dumps(labeled_to_record(labeled), ensure_ascii=False))
            out.write("\n")
            out.flush()
            written += 1
            if labeled.e_distill is not None:
                parsed += 1
    print(
        f"distilled {parsed}/{len(todo)} samples parsed"
        f" ({written} records written, {len(done)} skipped);"
        f" generator calls {client.calls}"
    )
    # Unparseable outputs count against the threshold like failures do.
    return _job_exit(parsed, len(todo), failures, run)


def cmd_merge_labels(args: argparse.Namespace) -> int:
    run = _run_config(args)
    dataset = _load_input(args.input, run)
    sources = [load_labels(path) for path in args.labels]
    feedbacker = CountingClient(
        make_client(run.feedbacker_endpoint, run.feedbacker_model, run)
    )
    cache = cache_for(run)
    cfg = sampling_for("feedbacker", run)
    template = template_for("summarizer", run)
    done = existing_ids(args.output)
    todo = [s for s in dataset if s.id not in done]

    def combined(sample: Sample) -> LabeledSample:
        merged = LabeledSample(sample_id=sample.id, e_manual=sample.manual_evidence)
        for source in sources:
            record = source.get(sample.id)
            if record is None:
                continue
            merged = replace(
                merged,
                e_search=record.e_search or merged.e_search,
                e_distill=record.e_distill or merged.e_distill,
                e_manual=record.e_manual or merged.e_manual,
                flags=tuple(dict.fromkeys(merged.flags + record.flags)),
            )
        return merged

    def work(sample: Sample) -> LabeledSample:
        return merge_labels(
            combined(sample),
            sample,
            feedbacker,
            cache=cache,
            cfg=cfg,
            template=template,
            token_budget=run.token_budget,
        )

    succeeded = 0
    failures: list[tuple[str, Exception]] = []
    with open(args.output, "a", encoding="utf-8") as out:
        for sample, result, exc in map_ordered(work, todo, run.workers):
            if exc is not None:
                failures.append((sample.id, exc))
                continue
            out.write(json.dumps(labeled_to_record(result), ensure_ascii=False))
            out.write("\n")
            out.flush()
            succeeded += 1
    print(
        f"merged {succeeded}/{len(todo)} samples"
        f" ({len(done)} skipped); generator calls {feedbacker.calls}"
    )
    return _job_exit(succeeded, len(todo), failures, run)


def cmd_highlight(args: argparse.Namespace) -> int:
    run = _run_config(args)
    dataset = _load_input(args.input, run)
    labels = load_labels(args.labels) if args.labels else {}
    wanted = set(args.id) if args.id else None
    shown = 0
    for sample in dataset:
        if wanted is not None and sample.id not in wanted:
            continue
        evidence = _resolve_evidence(sample, labels, args)
        if args.mode == "subtab":
            if evidence is None or len(evidence) == 0:
                raise EmptyEvidenceError(
                    f"{sample.id}: sub-table rendering needs evidence rows"
                )
            rendered = linearize(subtable(sample.table, evidence))
        else:
            marked = (
                highlight(sample.table, evidence) if evidence is not None else sample.table
            )
            rendered = linearize(marked)
        print(f"# {sample.id}")
        print(rendered.text)
        shown += 1
    if wanted is not None and shown < len(wanted):
        raise UnmatchedIdError(sorted(wanted - {s.id for s in dataset}))
    return EXIT_OK


def _resolve_evidence(
    sample: Sample, labels: dict[str, LabeledSample], args: argparse.Namespace
) -> Evidence | None:
    if args.evidence is not None:
        evidence = _parse_flag_evidence(args.evidence)
        evidence.check_range(sample.table.n_rows)
        return evidence
    record = labels.get(sample.id)
    if record is not None:
        source = args.source
        chosen = getattr(record, f"e_{source}")
        if chosen is not None:
            return chosen
    return sample.manual_evidence


def cmd_export_train(args: argparse.Namespace) -> int:
    run = _run_config(args)
    dataset = _load_input(args.input, run)
    labels = load_labels(args.labels)
    if args.role == "highlighter":
        count = export_highlighter_training(
            dataset,
            labels,
            args.output,
            strict=args.strict,
            template=template_for("highlighter", run),
            token_budget=run.token_budget,
        )
    else:
        count = export_summarizer_training(
            dataset,
            labels,
            args.output,
            source=args.source,
            strict=args.strict,
            template=template_for("summarizer", run),
            token_budget=run.token_budget,
        )
    print(f"exported {count} {args.role} records -> {args.output}")
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    run = _run_config(args)
    dataset = _load_input(args.input, run)
    highlighter = CountingClient(
        make_client(run.highlighter_endpoint, run.highlighter_model, run)
    )
    summarizer = CountingClient(
        make_client(run.summarizer_endpoint, run.summarizer_model, run)
    )
    cache = cache_for(run)
    h_cfg = sampling_for("highlighter", run)
    s_cfg = sampling_for("summarizer", run)
    h_template = template_for("highlighter", run)
    s_template = template_for("summarizer", run)
    done = existing_ids(args.output)
    todo = [s for s in dataset if s.id not in done]

    def work(sample: Sample) -> tuple[Evidence, str, list[str]]:
        flags: list[str] = []
        evidence = Evidence(())
        if run.ablation != "no_highlight":
            h_prompt = build_highlighter_prompt(
                sample.table,
                sample.query,
                None,
                template=h_template,
                sample_id=sample.id,
                token_budget=run.token_budget,
            )
            raw = cached_generate(highlighter, cache, h_prompt.text, h_cfg)
            try:
                evidence, warnings = parse_evidence_output(raw, sample.table.n_rows)
                flags.extend(warnings)
            except NoIndicesError:
                pass
            if len(evidence) == 0:
                flags.append("no-evidence")
        else:
            flags.append("no_highlight")
        if run.ablation == "subtab" and len(evidence) > 0:
            shown = subtable(sample.table, evidence)
            s_prompt = build_summarizer_prompt(
                shown,
                None,
                sample.query,
                None,
                template=s_template,
                sample_id=sample.id,
                token_budget=run.token_budget,
            )
        elif run.ablation == "full" and len(evidence) > 0:
            s_prompt = build_summarizer_prompt(
                sample.table,
                evidence,
                sample.query,
                None,
                template=s_template,
                sample_id=sample.id,
                token_budget=run.token_budget,
            )
        else:
            s_prompt = build_summarizer_prompt(
                sample.table,
                None,
                sample.query,
                None,
                template=s_template,
                sample_id=sample.id,
                token_budget=run.token_budget,
            )
        prediction = cached_generate(summarizer, cache, s_prompt.text, s_cfg)
        return evidence, prediction, flags

    succeeded = 0
    failures: list[tuple[str, Exception]] = []
    with open(args.output, "a", encoding="utf-8") as out:
        for sample, result, exc in map_ordered(work, todo, run.workers):
            if exc is not None:
                failures.append((sample.id, exc))
                continue
            evidence, prediction, flags = result
            record = {
                "id": sample.id,
                "evidence": list(evidence.indices),
                "prediction": prediction,
                "flags": flags,
            }
            out.write(json.dumps(record, ensure_ascii=False))
            out.write("\n")
            out.flush()
            succeeded += 1
    print(
        f"predicted {succeeded}/{len(todo)} samples ({len(done)} skipped);"
        f" highlighter calls {highlighter.calls}, summarizer calls {summarizer.calls}"
    )
    return _job_exit(succeeded, len(todo), failures, run)


def cmd_evaluate(args: argparse.Namespace) -> int:
    run = _run_config(args)
    dataset = _load_input(args.dataset, run)
    predictions: dict[str, str] = {}
    with open(args.predictions, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                sample_id = record["id"]
                text = record["prediction"]
            except (ValueError, KeyError, TypeError) as exc:
                raise SchemaError(
                    "predictions", f"{args.predictions}:{line_no}: {exc}"
                ) from exc
            if not isinstance(sample_id, str) or not isinstance(text, str):
                raise SchemaError(
                    "predictions", f"{args.predictions}:{line_no}: bad id/prediction"
                )
            predictions[sample_id] = text
    known = {sample.id for sample in dataset}
    unmatched = sorted(pid for pid in predictions if pid not in known)
    if unmatched:
        raise UnmatchedIdError(unmatched)
    pairs = [
        (predictions[sample.id], sample.reference)
        for sample in dataset
        if sample.id in predictions
    ]
    report = corpus_evaluate(pairs)
    print(report.format_table())
    report_path = args.report or f"{args.predictions}.scores.json"
    with open(report_path, "w", encoding="utf-8") as handle:
        handle.write(json.dumps(report.to_record(), ensure_ascii=False))
        handle.write("\n")
    print(f"report -> {report_path}")
    return EXIT_OK


# ------------------------------------------------------------- arg parsing


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="flat key=value config file")
    group = parser.add_argument_group(
        "config overrides", "highest precedence; see RunConfig for keys"
    )
    for f in fields(RunConfig):
        group.add_argument(
            "--" + f.name.replace("_", "-"),
            dest=f"cfg_{f.name}",
            metavar="V",
            help=f"override config key {f.name}",
        )


def _run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    for f in fields(RunConfig):
        value = getattr(args, f"cfg_{f.name}", None)
        if value is not None:
            overrides[f.name] = value
    return build_config(getattr(args, "config", None), os.environ, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tablehelm",
        description="Table-to-text pipeline tooling: evidence labels, "
        "prompt exports, two-step inference, and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert a dataset to canonical JSONL")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument(
        "--format",
        choices=("canonical", "fetaqa", "qtsumm"),
        default="canonical",
    )
    p.add_argument(
        "--strict",
        action=argparse.BooleanOptionalAction,
        default=False,
        help="fail on the first bad line instead of reporting and skipping",
    )
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("search-labels", help="greedy evidence search per sample")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--trace", help="also append full search traces to this file")
    _add_config_flags(p)
    p.set_defaults(func=cmd_search_labels)

    p = sub.add_parser("distill-labels", help="few-shot evidence distillation")
    p.add_argument("input")
    p.add_argument("output")
    _add_config_flags(p)
    p.set_defaults(func=cmd_distill_labels)

    p = sub.add_parser("merge-labels", help="pick the best label source by reward")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument(
        "--labels",
        action="append",
        default=[],
        help="label file to merge (repeatable); manual labels come from the dataset",
    )
    _add_config_flags(p)
    p.set_defaults(func=cmd_merge_labels)

    p = sub.add_parser("highlight", help="print highlighted or sub-table renderings")
    p.add_argument("input")
    p.add_argument("--id", action="append", help="sample id (repeatable; default all)")
    p.add_argument("--evidence", help="comma-separated row indices, e.g. 1,3")
    p.add_argument("--labels", help="label file to pull evidence from")
    p.add_argument(
        "--source",
        choices=("merge", "search", "distill", "manual"),
        default="merge",
        help="which label source to render when --labels is given",
    )
    p.add_argument("--mode", choices=("highlight", "subtab"), default="highlight")
    _add_config_flags(p)
    p.set_defaults(func=cmd_highlight)

    p = sub.add_parser("export-train", help="write instruction-tuning JSONL")
    p.add_argument("input")
    p.add_argument("labels")
    p.add_argument("output")
    p.add_argument("--role", choices=("highlighter", "summarizer"), required=True)
    p.add_argument(
        "--source",
        choices=("merge", "distill"),
        default="merge",
        help="evidence source for summarizer exports",
    )
    p.add_argument("--strict", action=argparse.BooleanOptionalAction, default=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_export_train)

    p = sub.add_parser("pipeline", help="two-step inference: highlight, summarize")
    p.add_argument("input")
    p.add_argument("output")
    _add_config_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("evaluate", help="score a predictions file against references")
    p.add_argument("predictions")
    p.add_argument("dataset")
    p.add_argument("--report", help="structured report path (default <predictions>.scores.json)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BACKEND_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (TableHelmError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
