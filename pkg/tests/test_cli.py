"""End-to-end command tests, run in process through cli.main."""

from __future__ import annotations

import json

import pytest

import support
import tablehelm.cli as cli
from tablehelm.cli import EXIT_BACKEND, EXIT_OK, EXIT_PARTIAL, EXIT_VALIDATION
from tablehelm.config import RunConfig
from tablehelm.errors import AuthError, SchemaError, TransportError
from tablehelm.evidence_lab import LabeledSample, load_labels, save_labels
from tablehelm.feedback import EchoClient, FixedClient, HttpClient
from tablehelm.table_core import Evidence


class FailingClient:
    model_id = "failing"

    def generate(self, prompt, cfg):
        raise TransportError("scripted outage")


class AuthFailingClient:
    model_id = "locked-out"

    def generate(self, prompt, cfg):
        raise AuthError("HTTP 401 from nowhere")


@pytest.fixture
def two_planted(tmp_path):
    """Canonical dataset file with two planted samples, plus their evidence."""
    first, first_planted = support.planted_sample("cli-1", 3, 2, (2,), manual=True)
    second, second_planted = support.planted_sample(
        "cli-2", 4, 2, (1, 3), salt="zz", manual=True
    )
    path = tmp_path / "data.jsonl"
    support.write_dataset(path, [first, second])
    return path, (first, first_planted), (second, second_planted)


def run_cli(argv, capsys):
    code = cli.main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestMakeClient:
    def test_echo(self):
        assert isinstance(cli.make_client("echo", "m", RunConfig()), EchoClient)

    def test_fixed_keeps_everything_after_the_prefix(self):
        client = cli.make_client("fixed:{1, 3}", "m", RunConfig())
        assert isinstance(client, FixedClient)
        assert client.text == "{1, 3}"
        assert cli.make_client("fixed:", "m", RunConfig()).text == ""

    def test_http_carries_run_settings(self):
        run = RunConfig(timeout=7.0, max_attempts=2)
        client = cli.make_client("https://api.test/v1", "model-x", run)
        assert isinstance(client, HttpClient)
        assert client.endpoint == "https://api.test/v1"
        assert client.model_id == "model-x"
        assert client.timeout == 7.0
        assert client.max_attempts == 2

    def test_unsupported_scheme_is_rejected(self):
        with pytest.raises(SchemaError):
            cli.make_client("ftp://files", "m", RunConfig())


class TestIngest:
    def test_round_trip(self, two_planted, tmp_path, capsys):
        data, _, _ = two_planted
        out = tmp_path / "canonical.jsonl"
        code, stdout, stderr = run_cli(["ingest", data, out], capsys)
        assert code == EXIT_OK
        assert stdout.strip() == f"ingested 2 samples -> {out}"
        assert stderr == ""
        assert len(out.read_text("utf-8").splitlines()) == 2

    def test_lenient_mode_reports_bad_lines(self, tmp_path, capsys):
        sample, _ = support.planted_sample("ok-1", 3, 2, (1,))
        data = tmp_path / "mixed.jsonl"
        support.write_dataset(data, [sample])
        with open(data, "a", encoding="utf-8") as handle:
            handle.write("{broken json\n")
        out = tmp_path / "out.jsonl"
        code, stdout, stderr = run_cli(["ingest", data, out], capsys)
        assert code == EXIT_OK
        assert "ingested 1 samples" in stdout
        assert stderr.startswith("line 2:")

    def test_strict_mode_fails_fast(self, tmp_path, capsys):
        data = tmp_path / "bad.jsonl"
        data.write_text("{broken json\n", encoding="utf-8")
        code, _, stderr = run_cli(
            ["ingest", data, tmp_path / "out.jsonl", "--strict"], capsys
        )
        assert code == EXIT_VALIDATION
        assert "error:" in stderr

    def test_empty_result_is_a_validation_failure(self, tmp_path, capsys):
        data = tmp_path / "empty.jsonl"
        data.write_text("", encoding="utf-8")
        code, stdout, stderr = run_cli(
            ["ingest", data, tmp_path / "out.jsonl"], capsys
        )
        assert code == EXIT_VALIDATION
        assert "ingested 0 samples" in stdout
        assert "warning:" in stderr

    def test_fetaqa_format(self, tmp_path, capsys):
        record = {
            "feta_id": 11,
            "table_array": [["Year", "Team"], ["1999", "Ajax"], ["2000", "PSV"]],
            "table_page_title": "Eredivisie",
            "table_section_title": "Champions",
            "question": "Who won in 2000?",
            "answer": "PSV won in 2000.",
            "highlighted_cell_ids": [[2, 0]],
        }
        data = tmp_path / "feta.jsonl"
        data.write_text(json.dumps(record) + "\n", encoding="utf-8")
        out = tmp_path / "out.jsonl"
        code, stdout, _ = run_cli(
            ["ingest", data, out, "--format", "fetaqa"], capsys
        )
        assert code == EXIT_OK
        assert "ingested 1 samples" in stdout
        parsed = json.loads(out.read_text("utf-8"))
        assert parsed["id"] == "11"
        assert parsed["title"] == "Eredivisie - Champions"


class TestSearchLabels:
    def test_labels_and_counts(self, two_planted, tmp_path, capsys):
        data, (first, first_planted), (second, second_planted) = two_planted
        out = tmp_path / "search.jsonl"
        code, stdout, stderr = run_cli(["search-labels", data, out], capsys)
        assert code == EXIT_OK
        assert stderr == ""
        assert stdout.strip() == (
            "searched 2/2 samples (skipped 0 already labeled);"
            " oracle evaluations 14, generator calls 14"
        )
        labels = load_labels(out)
        assert labels["cli-1"].e_search == first_planted
        assert labels["cli-2"].e_search == second_planted
        assert labels["cli-1"].e_manual == first.manual_evidence
        assert dict(labels["cli-1"].merge_rewards) == {"search": 1.0}
        assert labels["cli-1"].flags == ()

    def test_rerun_resumes_from_the_output_file(self, two_planted, tmp_path, capsys):
        data, _, _ = two_planted
        out = tmp_path / "search.jsonl"
        run_cli(["search-labels", data, out], capsys)
        code, stdout, _ = run_cli(["search-labels", data, out], capsys)
        assert code == EXIT_OK
        assert stdout.strip() == (
            "searched 0/0 samples (skipped 2 already labeled);"
            " oracle evaluations 0, generator calls 0"
        )

    def test_trace_file_records_every_candidate(self, two_planted, tmp_path, capsys):
        data, (first, _), _ = two_planted
        out = tmp_path / "search.jsonl"
        trace_path = tmp_path / "trace.jsonl"
        code, _, _ = run_cli(
            ["search-labels", data, out, "--trace", trace_path], capsys
        )
        assert code == EXIT_OK
        traces = [
            json.loads(line) for line in trace_path.read_text("utf-8").splitlines()
        ]
        assert [t["id"] for t in traces] == ["cli-1", "cli-2"]
        assert traces[0]["oracle_calls"] == 6
        assert len(traces[0]["candidates"]) == 6
        assert {c["phase"] for c in traces[0]["candidates"]} == {
            "singleton", "accumulate",
        }

    def test_backend_outage_exits_3(self, two_planted, tmp_path, capsys, monkeypatch):
        data, _, _ = two_planted
        monkeypatch.setattr(cli, "make_client", lambda *a, **k: FailingClient())
        code, _, stderr = run_cli(
            ["search-labels", data, tmp_path / "out.jsonl"], capsys
        )
        assert code == EXIT_BACKEND
        assert "failed cli-1:" in stderr

    def test_auth_failure_aborts_the_whole_job(
        self, two_planted, tmp_path, capsys, monkeypatch
    ):
        data, _, _ = two_planted
        monkeypatch.setattr(cli, "make_client", lambda *a, **k: AuthFailingClient())
        code, _, stderr = run_cli(
            ["search-labels", data, tmp_path / "out.jsonl"], capsys
        )
        assert code == EXIT_BACKEND
        assert "error: AuthError" in stderr

    def test_unsupported_endpoint_exits_2(self, two_planted, tmp_path, capsys):
        data, _, _ = two_planted
        code, _, stderr = run_cli(
            [
                "search-labels", data, tmp_path / "out.jsonl",
                "--feedbacker-endpoint", "grpc://nope",
            ],
            capsys,
        )
        assert code == EXIT_VALIDATION
        assert "error: SchemaError" in stderr


class TestDistillLabels:
    def test_fixed_endpoint_labels_every_sample(self, two_planted, tmp_path, capsys):
        data, _, _ = two_planted
        out = tmp_path / "distill.jsonl"
        code, stdout, _ = run_cli(
            ["distill-labels", data, out, "--distill-endpoint", "fixed:{1, 2}"],
            capsys,
        )
        assert code == EXIT_OK
        assert stdout.strip() == (
            "distilled 2/2 samples parsed (2 records written, 0 skipped);"
            " generator calls 2"
        )
        labels = load_labels(out)
        assert labels["cli-1"].e_distill == Evidence((1, 2))
        assert labels["cli-2"].e_distill == Evidence((1, 2))

    def test_unparseable_outputs_exit_partial(self, two_planted, tmp_path, capsys):
        data, _, _ = two_planted
        out = tmp_path / "distill.jsonl"
        code, stdout, stderr = run_cli(
            ["distill-labels", data, out, "--distill-endpoint", "fixed:no clue"],
            capsys,
        )
        assert code == EXIT_PARTIAL
        assert "distilled 0/2 samples parsed (2 records written, 0 skipped)" in stdout
        assert "no row indices" in stderr
        labels = load_labels(out)
        assert labels["cli-1"].e_distill is None

    def test_falls_back_to_the_feedbacker_endpoint(
        self, two_planted, tmp_path, capsys
    ):
        data, _, _ = two_planted
        out = tmp_path / "distill.jsonl"
        code, _, _ = run_cli(
            ["distill-labels", data, out, "--feedbacker-endpoint", "fixed:{2}"],
            capsys,
        )
        assert code == EXIT_OK
        assert load_labels(out)["cli-1"].e_distill == Evidence((2,))


class TestMergeLabels:
    def test_reward_argmax_over_manual_and_search(
        self, two_planted, tmp_path, capsys
    ):
        data, (first, first_planted), (second, second_planted) = two_planted
        search_file = tmp_path / "search.jsonl"
        save_labels(
            search_file,
            [
                LabeledSample(sample_id="cli-1", e_search=Evidence((1,))),
                LabeledSample(sample_id="cli-2", e_search=Evidence((2,))),
            ],
        )
        out = tmp_path / "merged.jsonl"
        code, stdout, _ = run_cli(
            ["merge-labels", data, out, "--labels", search_file], capsys
        )
        assert code == EXIT_OK
        assert stdout.strip() == (
            "merged 2/2 samples (0 skipped); generator calls 4"
        )
        merged = load_labels(out)
        # Manual labels are the planted rows, so they win the reward contest.
        assert merged["cli-1"].e_merge == first_planted
        assert merged["cli-2"].e_merge == second_planted
        rewards = dict(merged["cli-1"].merge_rewards)
        assert rewards["manual"] == 1.0
        assert rewards["search"] < 1.0

    def test_multiple_label_files_overlay_in_order(
        self, two_planted, tmp_path, capsys
    ):
        data, (first, first_planted), _ = two_planted
        older = tmp_path / "older.jsonl"
        newer = tmp_path / "newer.jsonl"
        save_labels(older, [LabeledSample(sample_id="cli-1", e_search=Evidence((1,)))])
        save_labels(
            newer, [LabeledSample(sample_id="cli-1", e_search=first_planted)]
        )
        out = tmp_path / "merged.jsonl"
        code, _, _ = run_cli(
            ["merge-labels", data, out, "--labels", older, "--labels", newer],
            capsys,
        )
        assert code == EXIT_OK
        merged = load_labels(out)
        assert merged["cli-1"].e_search == first_planted

    def test_without_any_label_source_exits_partial(self, tmp_path, capsys):
        sample, _ = support.planted_sample("nl-1", 3, 2, (1,))
        data = tmp_path / "data.jsonl"
        support.write_dataset(data, [sample])
        code, _, stderr = run_cli(
            ["merge-labels", data, tmp_path / "out.jsonl"], capsys
        )
        assert code == EXIT_PARTIAL
        assert "failed nl-1:" in stderr


class TestHighlight:
    def test_explicit_evidence_stars_rows(self, two_planted, capsys):
        data, (first, _), _ = two_planted
        code, stdout, _ = run_cli(
            ["highlight", data, "--id", "cli-1", "--evidence", "1,3"], capsys
        )
        assert code == EXIT_OK
        assert stdout.startswith("# cli-1\n")
        lines = stdout.splitlines()
        row_lines = [l for l in lines if l.startswith("row ")]
        assert row_lines[0].startswith("row 1 : *")
        assert not row_lines[1].startswith("row 2 : *")
        assert row_lines[2].startswith("row 3 : *")

    def test_subtab_mode_renders_only_the_evidence(self, two_planted, capsys):
        data, _, _ = two_planted
        code, stdout, _ = run_cli(
            [
                "highlight", data, "--id", "cli-2",
                "--evidence", "1,3", "--mode", "subtab",
            ],
            capsys,
        )
        assert code == EXIT_OK
        row_lines = [l for l in stdout.splitlines() if l.startswith("row ")]
        assert len(row_lines) == 2
        assert row_lines[0].startswith("row 1 :")
        assert row_lines[1].startswith("row 2 :")
        assert "*" not in stdout

    def test_manual_evidence_is_the_default(self, two_planted, capsys):
        data, (first, first_planted), _ = two_planted
        code, stdout, _ = run_cli(["highlight", data, "--id", "cli-1"], capsys)
        assert code == EXIT_OK
        starred = [l for l in stdout.splitlines() if l.startswith("row 2 : *")]
        assert starred

    def test_label_file_source_selection(self, two_planted, tmp_path, capsys):
        data, _, _ = two_planted
        labels = tmp_path / "labels.jsonl"
        save_labels(
            labels, [LabeledSample(sample_id="cli-1", e_search=Evidence((3,)))]
        )
        code, stdout, _ = run_cli(
            [
                "highlight", data, "--id", "cli-1",
                "--labels", labels, "--source", "search",
            ],
            capsys,
        )
        assert code == EXIT_OK
        assert any(l.startswith("row 3 : *") for l in stdout.splitlines())

    def test_explicit_evidence_beats_label_files(self, two_planted, tmp_path, capsys):
        data, _, _ = two_planted
        labels = tmp_path / "labels.jsonl"
        save_labels(
            labels, [LabeledSample(sample_id="cli-1", e_search=Evidence((3,)))]
        )
        code, stdout, _ = run_cli(
            [
                "highlight", data, "--id", "cli-1", "--labels", labels,
                "--source", "search", "--evidence", "1",
            ],
            capsys,
        )
        assert code == EXIT_OK
        lines = stdout.splitlines()
        assert any(l.startswith("row 1 : *") for l in lines)
        assert not any(l.startswith("row 3 : *") for l in lines)

    def test_unknown_id_exits_2(self, two_planted, capsys):
        data, _, _ = two_planted
        code, _, stderr = run_cli(["highlight", data, "--id", "ghost"], capsys)
        assert code == EXIT_VALIDATION
        assert "error: UnmatchedIdError" in stderr

    def test_subtab_without_evidence_exits_2(self, tmp_path, capsys):
        sample, _ = support.planted_sample("ne-1", 3, 2, (1,))
        data = tmp_path / "data.jsonl"
        support.write_dataset(data, [sample])
        code, _, stderr = run_cli(
            ["highlight", data, "--mode", "subtab"], capsys
        )
        assert code == EXIT_VALIDATION
        assert "error: EmptyEvidenceError" in stderr


class TestExportTrain:
    def make_labels(self, tmp_path, with_second=True):
        labels = [
            LabeledSample(
                sample_id="cli-1",
                e_search=Evidence((2,)),
                e_distill=Evidence((1,)),
                e_merge=Evidence((2,)),
            )
        ]
        if with_second:
            labels.append(
                LabeledSample(
                    sample_id="cli-2",
                    e_search=Evidence((1, 3)),
                    e_distill=Evidence((2,)),
                    e_merge=Evidence((1, 3)),
                )
            )
        path = tmp_path / "labels.jsonl"
        save_labels(path, labels)
        return path

    def test_highlighter_role(self, two_planted, tmp_path, capsys):
        data, _, _ = two_planted
        labels = self.make_labels(tmp_path)
        out = tmp_path / "train.jsonl"
        code, stdout, _ = run_cli(
            ["export-train", data, labels, out, "--role", "highlighter"], capsys
        )
        assert code == EXIT_OK
        assert stdout.strip() == f"exported 2 highlighter records -> {out}"
        records = [json.loads(l) for l in out.read_text("utf-8").splitlines()]
        assert [r["completion"] for r in records] == ["{2}", "{1, 3}"]

    def test_summarizer_role_with_distill_source(self, two_planted, tmp_path, capsys):
        data, _, _ = two_planted
        labels = self.make_labels(tmp_path)
        out = tmp_path / "train.jsonl"
        code, stdout, _ = run_cli(
            [
                "export-train", data, labels, out,
                "--role", "summarizer", "--source", "distill",
            ],
            capsys,
        )
        assert code == EXIT_OK
        assert "exported 2 summarizer records" in stdout
        records = [json.loads(l) for l in out.read_text("utf-8").splitlines()]
        assert all("*" in r["prompt"] for r in records)

    def test_strict_export_fails_on_missing_labels(
        self, two_planted, tmp_path, capsys
    ):
        data, _, _ = two_planted
        labels = self.make_labels(tmp_path, with_second=False)
        code, _, stderr = run_cli(
            [
                "export-train", data, labels, tmp_path / "train.jsonl",
                "--role", "highlighter",
            ],
            capsys,
        )
        assert code == EXIT_VALIDATION
        assert "error: MissingLabelError" in stderr

    def test_lenient_export_skips_missing_labels(
        self, two_planted, tmp_path, capsys
    ):
        data, _, _ = two_planted
        labels = self.make_labels(tmp_path, with_second=False)
        code, stdout, _ = run_cli(
            [
                "export-train", data, labels, tmp_path / "train.jsonl",
                "--role", "highlighter", "--no-strict",
            ],
            capsys,
        )
        assert code == EXIT_OK
        assert "exported 1 highlighter records" in stdout


class TestPipeline:
    def test_fixed_highlighter_with_echo_summarizer(
        self, two_planted, tmp_path, capsys
    ):
        data, (first, _), (second, _) = two_planted
        out = tmp_path / "pred.jsonl"
        code, stdout, _ = run_cli(
            ["pipeline", data, out, "--highlighter-endpoint", "fixed:{1}"], capsys
        )
        assert code == EXIT_OK
        assert stdout.strip() == (
            "predicted 2/2 samples (0 skipped);"
            " highlighter calls 2, summarizer calls 2"
        )
        records = [json.loads(l) for l in out.read_text("utf-8").splitlines()]
        assert [r["id"] for r in records] == ["cli-1", "cli-2"]
        for record, sample in zip(records, (first, second)):
            assert record["evidence"] == [1]
            assert record["flags"] == []
            assert record["prediction"] == " ".join(sample.table.rows[0])

    def test_subtab_ablation_summarizes_the_subtable(
        self, two_planted, tmp_path, capsys
    ):
        data, (first, _), _ = two_planted
        out = tmp_path / "pred.jsonl"
        code, _, _ = run_cli(
            [
                "pipeline", data, out,
                "--highlighter-endpoint", "fixed:{1, 2}",
                "--ablation", "subtab",
            ],
            capsys,
        )
        assert code == EXIT_OK
        records = [json.loads(l) for l in out.read_text("utf-8").splitlines()]
        assert records[0]["evidence"] == [1, 2]
        want = " ".join(first.table.rows[0]) + " " + " ".join(first.table.rows[1])
        assert records[0]["prediction"] == want

    def test_no_highlight_ablation_skips_the_highlighter(
        self, two_planted, tmp_path, capsys
    ):
        data, (first, _), _ = two_planted
        out = tmp_path / "pred.jsonl"
        code, stdout, _ = run_cli(
            ["pipeline", data, out, "--ablation", "no_highlight"], capsys
        )
        assert code == EXIT_OK
        assert "highlighter calls 0, summarizer calls 2" in stdout
        records = [json.loads(l) for l in out.read_text("utf-8").splitlines()]
        assert records[0]["flags"] == ["no_highlight"]
        assert records[0]["evidence"] == []
        want = " ".join(" ".join(row) for row in first.table.rows)
        assert records[0]["prediction"] == want

    def test_echo_highlighter_on_wordy_tables_flags_no_evidence(
        self, two_planted, tmp_path, capsys
    ):
        # The echo oracle answers with table words, which contain no indices.
        data, (first, _), _ = two_planted
        out = tmp_path / "pred.jsonl"
        code, _, _ = run_cli(["pipeline", data, out], capsys)
        assert code == EXIT_OK
        records = [json.loads(l) for l in out.read_text("utf-8").splitlines()]
        assert records[0]["flags"] == ["no-evidence"]
        assert records[0]["evidence"] == []

    def test_rerun_skips_finished_samples(self, two_planted, tmp_path, capsys):
        data, _, _ = two_planted
        out = tmp_path / "pred.jsonl"
        run_cli(["pipeline", data, out], capsys)
        code, stdout, _ = run_cli(["pipeline", data, out], capsys)
        assert code == EXIT_OK
        assert stdout.strip() == (
            "predicted 0/0 samples (2 skipped);"
            " highlighter calls 0, summarizer calls 0"
        )

    def test_warm_cache_needs_no_generator_calls(
        self, two_planted, tmp_path, capsys
    ):
        data, _, _ = two_planted
        cache_dir = tmp_path / "cache"
        first_out = tmp_path / "pred1.jsonl"
        second_out = tmp_path / "pred2.jsonl"
        run_cli(
            ["pipeline", data, first_out, "--cache-dir", cache_dir], capsys
        )
        code, stdout, _ = run_cli(
            ["pipeline", data, second_out, "--cache-dir", cache_dir], capsys
        )
        assert code == EXIT_OK
        assert "highlighter calls 0, summarizer calls 0" in stdout
        assert first_out.read_bytes() == second_out.read_bytes()

    def test_config_file_steers_the_run_and_flags_win(
        self, two_planted, tmp_path, capsys
    ):
        data, _, _ = two_planted
        cfg = tmp_path / "run.cfg"
        cfg.write_text("ablation = no_highlight\n", encoding="utf-8")
        out = tmp_path / "pred.jsonl"
        _, stdout, _ = run_cli(
            ["pipeline", data, out, "--config", cfg], capsys
        )
        assert "highlighter calls 0" in stdout
        out2 = tmp_path / "pred2.jsonl"
        _, stdout, _ = run_cli(
            ["pipeline", data, out2, "--config", cfg, "--ablation", "full"],
            capsys,
        )
        assert "highlighter calls 2" in stdout


class TestEvaluate:
    def write_predictions(self, path, rows):
        with open(path, "w", encoding="utf-8") as handle:
            for sample_id, text in rows:
                handle.write(json.dumps({"id": sample_id, "prediction": text}))
                handle.write("\n")

    def test_perfect_predictions_score_100(self, two_planted, tmp_path, capsys):
        data, (first, _), (second, _) = two_planted
        preds = tmp_path / "pred.jsonl"
        self.write_predictions(
            preds, [("cli-1", first.reference), ("cli-2", second.reference)]
        )
        code, stdout, _ = run_cli(["evaluate", preds, data], capsys)
        assert code == EXIT_OK
        assert "samples: 2" in stdout
        assert "ROUGE-1  100.00" in stdout
        assert f"report -> {preds}.scores.json" in stdout
        report = json.loads((tmp_path / "pred.jsonl.scores.json").read_text("utf-8"))
        assert report["rouge1"] == 100.0
        assert report["bleu"] == 100.0
        assert report["sample_count"] == 2
        assert report["notes"]

    def test_custom_report_path(self, two_planted, tmp_path, capsys):
        data, (first, _), _ = two_planted
        preds = tmp_path / "pred.jsonl"
        self.write_predictions(preds, [("cli-1", first.reference)])
        report_path = tmp_path / "scores.json"
        code, stdout, _ = run_cli(
            ["evaluate", preds, data, "--report", report_path], capsys
        )
        assert code == EXIT_OK
        assert f"report -> {report_path}" in stdout
        assert json.loads(report_path.read_text("utf-8"))["sample_count"] == 1

    def test_partial_coverage_scores_the_covered_subset(
        self, two_planted, tmp_path, capsys
    ):
        data, _, (second, _) = two_planted
        preds = tmp_path / "pred.jsonl"
        self.write_predictions(preds, [("cli-2", second.reference)])
        code, stdout, _ = run_cli(["evaluate", preds, data], capsys)
        assert code == EXIT_OK
        assert "samples: 1" in stdout

    def test_unknown_prediction_id_exits_2(self, two_planted, tmp_path, capsys):
        data, (first, _), _ = two_planted
        preds = tmp_path / "pred.jsonl"
        self.write_predictions(preds, [("ghost", first.reference)])
        code, _, stderr = run_cli(["evaluate", preds, data], capsys)
        assert code == EXIT_VALIDATION
        assert "error: UnmatchedIdError" in stderr

    def test_malformed_prediction_line_exits_2(self, two_planted, tmp_path, capsys):
        data, _, _ = two_planted
        preds = tmp_path / "pred.jsonl"
        preds.write_text('{"id": "cli-1"}\n', encoding="utf-8")
        code, _, stderr = run_cli(["evaluate", preds, data], capsys)
        assert code == EXIT_VALIDATION
        assert "error: SchemaError" in stderr
