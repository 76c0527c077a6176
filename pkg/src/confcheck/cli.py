"""Command-line interface.

Subcommands: check, simulate, graph, import-design, validate-design.
Exit codes: 0 when every checked trace conforms, 1 when non-conformance was
found by a completed check, 2 for usage, IO, or validation errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import checker, design, ingest, report, simulator

EXIT_CONFORMANT = 0
EXIT_NONCONFORMANT = 1
EXIT_ERROR = 2

WORKERS_ENV_VAR = "CONFCHECK_WORKERS"


def _default_workers() -> int:
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        try:
            value = int(env)
            if value >= 1:
                return value
        except ValueError:
            pass
        print(f"warning: ignoring invalid {WORKERS_ENV_VAR}={env!r}", file=sys.stderr)
    return checker.default_worker_count()


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_ERROR


def _write_output(text: str, out_path: Optional[str]) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        Path(out_path).write_text(text, encoding="utf-8")


def _load_design(path: str) -> design.DesignTraceSet:
    return design.load_design_set(Path(path).read_bytes())


def _load_corpus(path: str):
    traces, warnings = ingest.load_corpus_dir(path)
    if warnings:
        print(f"warning: {len(warnings)} ingest warning(s)", file=sys.stderr)
    return traces


def cmd_check(args: argparse.Namespace) -> int:
    if args.workers < 1:
        return _fail(f"--workers must be a positive integer, got {args.workers}")
    if args.max_ids < 0:
        return _fail(f"--max-ids must be non-negative, got {args.max_ids}")
    try:
        design_set = _load_design(args.design)
        traces = _load_corpus(args.traces)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))

    corpus_report, verdicts = checker.check_corpus(design_set, traces, workers=args.workers)
    if args.format == "json":
        payload = report.report_to_json_dict(corpus_report, verdicts, max_ids=args.max_ids)
        _write_output(json.dumps(payload, indent=2) + "\n", args.out)
    else:
        _write_output(report.render_text_report(corpus_report), args.out)
    return EXIT_CONFORMANT if corpus_report.nonconformant_traces == 0 else EXIT_NONCONFORMANT


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        config = simulator.SimConfig(
            seed=args.seed,
            trace_count=args.count,
            p_omit=args.p_omit,
            p_slow=args.p_slow,
            p_direct=args.p_direct,
        )
    except ValueError as exc:
        return _fail(str(exc))
    try:
        traces = simulator.generate_corpus(config)
        file_count = simulator.write_corpus(traces, args.out_dir, args.traces_per_file)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    print(f"wrote {len(traces)} traces to {file_count} file(s) in {args.out_dir}")
    return EXIT_CONFORMANT


def cmd_graph(args: argparse.Namespace) -> int:
    try:
        design_set = _load_design(args.design)
        traces = _load_corpus(args.traces)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    trace = next((t for t in traces if t.trace_id == args.trace_id), None)
    if trace is None:
        return _fail(f"trace id {args.trace_id} not found in {args.traces}")
    _write_output(report.render_trace_dot(design_set, trace), args.out)
    return EXIT_CONFORMANT


def cmd_import_design(args: argparse.Namespace) -> int:
    try:
        traces = _load_corpus(args.traces)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    trace = next((t for t in traces if t.trace_id == args.trace_id), None)
    if trace is None:
        return _fail(f"trace id {args.trace_id} not found in {args.traces}")
    keep = set(args.keep) if args.keep else set(trace.spans)
    try:
        imported = design.import_design_from_observed(trace, keep)
        design_set = design.DesignTraceSet.of([imported])
    except ValueError as exc:
        return _fail(str(exc))
    _write_output(design.serialize_design_set(design_set), args.out)
    return EXIT_CONFORMANT


def cmd_validate_design(args: argparse.Namespace) -> int:
    try:
        design_set = _load_design(args.design)
    except OSError as exc:
        return _fail(str(exc))
    except design.DesignValidationError as exc:
        for error in exc.errors:
            print(f"error: {error}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        return _fail(str(exc))
    span_count = sum(len(t.spans) for t in design_set.design_traces)
    print(
        f"valid: {len(design_set.design_traces)} design trace(s), {span_count} span(s), "
        f"{len(design_set.required_traces)} required / {len(design_set.disallowed_traces)} disallowed"
    )
    return EXIT_CONFORMANT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confcheck",
        description="Check observed distributed traces for conformance with design traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="check a trace corpus against a design file")
    p_check.add_argument("design", help="design file (JSON)")
    p_check.add_argument("traces", help="directory of exported trace files")
    p_check.add_argument("--out", help="write the report here instead of stdout")
    p_check.add_argument("--format", choices=("text", "json"), default="text")
    p_check.add_argument("--workers", type=int, default=_default_workers())
    p_check.add_argument("--max-ids", type=int, default=1000, help="cap on nonConformantTraceIds in JSON output")
    p_check.set_defaults(func=cmd_check)

    p_sim = sub.add_parser("simulate", help="generate a deterministic trace corpus")
    p_sim.add_argument("out_dir", help="directory to write corpus files into")
    p_sim.add_argument("--count", type=int, required=True, help="number of traces to generate")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--p-omit", type=float, default=0.0, help="probability of omitting the backend query span")
    p_sim.add_argument("--p-slow", type=float, default=0.0, help="probability of inflating the root duration past budget")
    p_sim.add_argument("--p-direct", type=float, default=0.0, help="probability of adding a gateway-side query span")
    p_sim.add_argument("--traces-per-file", type=int, default=1000)
    p_sim.set_defaults(func=cmd_simulate)

    p_graph = sub.add_parser("graph", help="render one trace as a DOT span graph with its verdict")
    p_graph.add_argument("design", help="design file (JSON)")
    p_graph.add_argument("traces", help="directory of exported trace files")
    p_graph.add_argument("--trace-id", required=True)
    p_graph.add_argument("--out", help="write DOT here instead of stdout")
    p_graph.set_defaults(func=cmd_graph)

    p_import = sub.add_parser("import-design", help="derive a design file from an observed trace")
    p_import.add_argument("traces", help="directory of exported trace files")
    p_import.add_argument("--trace-id", required=True)
    p_import.add_argument("--keep", action="append", metavar="SPAN_ID", help="span to keep (repeatable; default: all spans)")
    p_import.add_argument("--out", help="write the design file here instead of stdout")
    p_import.set_defaults(func=cmd_import_design)

    p_validate = sub.add_parser("validate-design", help="validate a design file and print a summary")
    p_validate.add_argument("design", help="design file (JSON)")
    p_validate.set_defaults(func=cmd_validate_design)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors and 0 for --help.
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    return args.func(args)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
