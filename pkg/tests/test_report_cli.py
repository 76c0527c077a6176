"""Report rendering, DOT graphs, and the command-line interface."""

from __future__ import annotations

import json
import shutil
from importlib import resources

import pytest

from confcheck.checker import check_corpus
from confcheck.cli import main
from confcheck.design import load_design_set
from confcheck.report import render_text_report, render_trace_dot, report_to_json_dict

from conftest import FIXTURES_DIR

BUNDLED_DESIGN = str(resources.files("confcheck").joinpath("fixtures/table2.design.json"))

CONFORMANT_ID = "3fa2b9c01d4e8b76a5091f2edc43ab10"
NONCONFORMANT_ID = "4fb3cad12e5f9c87b61a2f3fedc54bc2"


@pytest.fixture()
def fixture_corpus_dir(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    shutil.copy(FIXTURES_DIR / "conformant.trace.json", corpus)
    shutil.copy(FIXTURES_DIR / "nonconformant.trace.json", corpus)
    return corpus


@pytest.fixture()
def conformant_corpus_dir(tmp_path):
    corpus = tmp_path / "conformant-corpus"
    corpus.mkdir()
    shutil.copy(FIXTURES_DIR / "conformant.trace.json", corpus)
    return corpus


class TestReportRendering:
    def test_json_schema_keys(self, design_set, conformant_trace, nonconformant_trace):
        report, verdicts = check_corpus(design_set, [conformant_trace, nonconformant_trace])
        payload = report_to_json_dict(report, verdicts)
        assert list(payload) == [
            "totalTraces",
            "conformantTraces",
            "nonConformantTraces",
            "conformancePercentage",
            "violationsByKind",
            "tracesByKind",
            "violationsByDesignSpan",
            "nonConformantTraceIds",
        ]
        assert list(payload["violationsByKind"]) == [
            "missingRequired",
            "durationExceeded",
            "disallowedPresent",
        ]
        assert payload["totalTraces"] == 2
        assert payload["conformantTraces"] == 1
        assert payload["nonConformantTraces"] == 1
        assert payload["conformancePercentage"] == 0.5
        assert payload["violationsByDesignSpan"] == [
            {"designTraceId": "gateway-db-access", "designSpanId": "D", "count": 1},
            {"designTraceId": "gateway-db-access", "designSpanId": "E", "count": 1},
            {"designTraceId": "required-flow", "designSpanId": "A", "count": 1},
        ]
        assert payload["nonConformantTraceIds"] == [NONCONFORMANT_ID]

    def test_max_ids_caps_listing(self, design_set, nonconformant_trace):
        report, verdicts = check_corpus(design_set, [nonconformant_trace])
        payload = report_to_json_dict(report, verdicts, max_ids=0)
        assert payload["nonConformantTraceIds"] == []
        assert payload["nonConformantTraces"] == 1

    def test_text_and_json_share_counts(self, design_set, conformant_trace, nonconformant_trace):
        report, verdicts = check_corpus(design_set, [conformant_trace, nonconformant_trace])
        payload = report_to_json_dict(report, verdicts)
        text = render_text_report(report)
        assert f"Traces checked:    {payload['totalTraces']}" in text
        assert f"Conformant:        {payload['conformantTraces']}" in text
        assert f"Non-conformant:    {payload['nonConformantTraces']}" in text
        assert "Conformance:       50.00%" in text
        for kind, count in payload["violationsByKind"].items():
            assert kind in text
        assert "gateway-db-access/D" in text

    def test_percentage_formatting(self, design_set, conformant_trace):
        report, _ = check_corpus(design_set, [conformant_trace])
        assert "Conformance:       100.00%" in render_text_report(report)

    def test_empty_corpus_flagged(self, design_set):
        report, _ = check_corpus(design_set, [])
        assert "empty corpus" in render_text_report(report)


class TestDotRendering:
    def test_conformant_graph_has_green_chain_and_no_red(self, design_set, conformant_trace):
        dot = render_trace_dot(design_set, conformant_trace)
        assert dot.startswith('digraph "trace_3fa2b9c01d4e8b76a5091f2edc43ab10"')
        assert "red" not in dot
        assert dot.count("color=green") == 3  # root, microservice request, query
        assert '"1a2b3c4d5e6f7a81" -> "2b3c4d5e6f7a8192";' in dot

    def test_nonconformant_graph_marks_witnesses(self, design_set, nonconformant_trace):
        dot = render_trace_dot(design_set, nonconformant_trace)
        # The gateway-side query witnesses the disallowed pattern: filled red.
        assert '"e5f60718293a4b5c" [label="sql_server.query\\ngateway\\n20000 us", style=filled, fillcolor=red];' in dot
        # The root both exceeds its budget and anchors the disallowed pattern;
        # the disallowed fill wins.
        assert '"a1b2c3d4e5f60718" [label="aspnet_core.request\\ngateway\\n600000 us", style=filled, fillcolor=red];' in dot

    def test_missing_span_renders_ghost_node(self, design_set, conformant_trace):
        from confcheck.model import ObservedTrace

        without_query = ObservedTrace.from_spans(
            conformant_trace.trace_id,
            [s for s in conformant_trace.spans.values() if s.name != "sql_server.query"],
        )
        dot = render_trace_dot(design_set, without_query)
        assert '"missing_required-flow_C"' in dot
        assert "style=dashed" in dot
        assert "DB operation" in dot

    def test_dot_output_is_stable(self, design_set, nonconformant_trace):
        assert render_trace_dot(design_set, nonconformant_trace) == render_trace_dot(
            design_set, nonconformant_trace
        )


class TestCheckCommand:
    def test_conformant_corpus_exits_zero(self, conformant_corpus_dir, capsys):
        code = main(["check", BUNDLED_DESIGN, str(conformant_corpus_dir), "--workers", "1"])
        out = capsys.readouterr().out
        assert code == 0
        assert "Conformance:       100.00%" in out

    def test_nonconformant_corpus_exits_one(self, fixture_corpus_dir, capsys):
        code = main(["check", BUNDLED_DESIGN, str(fixture_corpus_dir), "--workers", "1"])
        assert code == 1
        assert "Conformance:       50.00%" in capsys.readouterr().out

    def test_json_format_written_to_file(self, fixture_corpus_dir, tmp_path):
        out_file = tmp_path / "report.json"
        code = main(
            [
                "check",
                BUNDLED_DESIGN,
                str(fixture_corpus_dir),
                "--workers",
                "1",
                "--format",
                "json",
                "--out",
                str(out_file),
            ]
        )
        assert code == 1
        payload = json.loads(out_file.read_text())
        assert payload["totalTraces"] == 2
        assert payload["nonConformantTraceIds"] == [NONCONFORMANT_ID]

    def test_missing_design_file_exits_two(self, fixture_corpus_dir, capsys):
        code = main(["check", "/nope/missing.json", str(fixture_corpus_dir)])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_invalid_design_file_exits_two(self, tmp_path, fixture_corpus_dir, capsys):
        bad = tmp_path / "bad.design.json"
        bad.write_text('{"designTraces": [{"id": "t", "spans": []}]}')
        code = main(["check", str(bad), str(fixture_corpus_dir)])
        assert code == 2

    def test_missing_corpus_dir_exits_two(self, capsys):
        code = main(["check", BUNDLED_DESIGN, "/nope/corpus"])
        assert code == 2

    def test_zero_workers_exits_two(self, fixture_corpus_dir, capsys):
        code = main(["check", BUNDLED_DESIGN, str(fixture_corpus_dir), "--workers", "0"])
        assert code == 2
        assert "--workers" in capsys.readouterr().err

    def test_negative_max_ids_exits_two(self, fixture_corpus_dir, capsys):
        code = main(["check", BUNDLED_DESIGN, str(fixture_corpus_dir), "--max-ids", "-1"])
        assert code == 2


class TestSimulateCommand:
    def test_simulate_writes_corpus(self, tmp_path, capsys):
        out_dir = tmp_path / "sim"
        code = main(
            [
                "simulate",
                str(out_dir),
                "--count",
                "1000",
                "--seed",
                "42",
                "--p-direct",
                "0.1",
                "--traces-per-file",
                "500",
            ]
        )
        assert code == 0
        assert "wrote 1000 traces to 2 file(s)" in capsys.readouterr().out
        assert len(list(out_dir.glob("corpus-*.json"))) == 2

    def test_out_of_range_probability_exits_two(self, tmp_path, capsys):
        code = main(["simulate", str(tmp_path / "x"), "--count", "10", "--p-slow", "1.5"])
        assert code == 2
        assert "probability" in capsys.readouterr().err

    def test_zero_count_exits_two(self, tmp_path):
        assert main(["simulate", str(tmp_path / "x"), "--count", "0"]) == 2

    def test_simulated_corpus_round_trips_through_check(self, tmp_path, capsys):
        out_dir = tmp_path / "sim"
        assert main(["simulate", str(out_dir), "--count", "50", "--seed", "5"]) == 0
        code = main(["check", BUNDLED_DESIGN, str(out_dir), "--workers", "1"])
        assert code == 0


class TestGraphCommand:
    def test_graph_writes_dot(self, fixture_corpus_dir, tmp_path):
        out = tmp_path / "trace.dot"
        code = main(
            [
                "graph",
                BUNDLED_DESIGN,
                str(fixture_corpus_dir),
                "--trace-id",
                NONCONFORMANT_ID,
                "--out",
                str(out),
            ]
        )
        assert code == 0
        dot = out.read_text()
        assert "fillcolor=red" in dot

    def test_unknown_trace_id_exits_two(self, fixture_corpus_dir, capsys):
        code = main(
            [
                "graph",
                BUNDLED_DESIGN,
                str(fixture_corpus_dir),
                "--trace-id",
                "f" * 32,
            ]
        )
        assert code == 2
        assert "not found" in capsys.readouterr().err


class TestImportDesignCommand:
    def test_full_import_round_trips_through_check(self, conformant_corpus_dir, tmp_path):
        design_out = tmp_path / "imported.design.json"
        code = main(
            [
                "import-design",
                str(conformant_corpus_dir),
                "--trace-id",
                CONFORMANT_ID,
                "--out",
                str(design_out),
            ]
        )
        assert code == 0
        imported = load_design_set(design_out.read_bytes())
        assert len(imported.design_traces) == 1
        assert len(imported.design_traces[0].spans) == 6
        # The source trace conforms to its own imported design.
        assert main(["check", str(design_out), str(conformant_corpus_dir), "--workers", "1"]) == 0

    def test_partial_import_sets_non_immediate_flag(self, conformant_corpus_dir, tmp_path, capsys):
        root = "1a2b3c4d5e6f7a81"
        leaf = "4d5e6f7a81920314"
        code = main(
            [
                "import-design",
                str(conformant_corpus_dir),
                "--trace-id",
                CONFORMANT_ID,
                "--keep",
                root,
                "--keep",
                leaf,
            ]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        spans = {s["spanId"]: s for s in payload["designTraces"][0]["spans"]}
        assert spans[leaf]["parentSpanId"] == root
        assert spans[leaf]["design"]["allowNonImmediateParent"] is True
        assert spans[root]["design"]["allowNonImmediateParent"] is False

    def test_unknown_keep_id_exits_two(self, conformant_corpus_dir, capsys):
        code = main(
            [
                "import-design",
                str(conformant_corpus_dir),
                "--trace-id",
                CONFORMANT_ID,
                "--keep",
                "00000000000000ff",
            ]
        )
        assert code == 2


class TestValidateDesignCommand:
    def test_valid_design_summary(self, capsys):
        assert main(["validate-design", BUNDLED_DESIGN]) == 0
        out = capsys.readouterr().out
        assert "2 design trace(s), 5 span(s)" in out
        assert "1 required / 1 disallowed" in out

    def test_invalid_design_lists_errors(self, tmp_path, capsys):
        bad = tmp_path / "bad.design.json"
        bad.write_text(
            json.dumps(
                {
                    "designTraces": [
                        {
                            "id": "t",
                            "spans": [
                                {
                                    "spanId": "A",
                                    "name": "op",
                                    "parentSpanId": "Z",
                                    "match": {"service.name": "svc"},
                                    "design": {},
                                }
                            ],
                        }
                    ]
                }
            )
        )
        assert main(["validate-design", str(bad)]) == 2
        assert "unknownParent" in capsys.readouterr().err


class TestUsage:
    def test_no_subcommand_exits_two(self, capsys):
        assert main([]) == 2

    def test_workers_env_override(self, monkeypatch):
        from confcheck.cli import _default_workers

        monkeypatch.setenv("CONFCHECK_WORKERS", "3")
        assert _default_workers() == 3
        monkeypatch.setenv("CONFCHECK_WORKERS", "bogus")
        assert _default_workers() >= 1
