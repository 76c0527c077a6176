"""Report rendering: JSON and text summaries, and DOT span graphs.

The JSON schema is stable and machine-readable; the text form is for
terminals. Both are computed from the same report object so their counts
can never disagree.
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Optional, Tuple

from .checker import ConformanceReport, check_trace, match_witnesses
from .design import DesignTraceSet
from .model import ObservedTrace, SpanId, TraceVerdict, Violation, ViolationKind

__all__ = ["report_to_json_dict", "render_text_report", "render_trace_dot"]


def report_to_json_dict(
    report: ConformanceReport,
    verdicts: Iterable[TraceVerdict],
    max_ids: int = 1000,
) -> dict:
    """Assemble the JSON report object.

    ``nonConformantTraceIds`` lists offending trace ids in ascending order,
    capped at ``max_ids`` entries.
    """
    nonconformant_ids = sorted(v.trace_id for v in verdicts if not v.conformant)
    by_design_span = [
        {"designTraceId": trace_id, "designSpanId": span_id, "count": count}
        for (trace_id, span_id), count in sorted(report.violations_by_design_span.items())
    ]
    return {
        "totalTraces": report.total_traces,
        "conformantTraces": report.conformant_traces,
        "nonConformantTraces": report.nonconformant_traces,
        "conformancePercentage": report.conformance_percentage,
        "violationsByKind": {kind.value: report.violations_by_kind.get(kind, 0) for kind in ViolationKind},
        "tracesByKind": {kind.value: report.traces_by_kind.get(kind, 0) for kind in ViolationKind},
        "violationsByDesignSpan": by_design_span,
        "nonConformantTraceIds": nonconformant_ids[:max_ids],
    }


def render_text_report(report: ConformanceReport) -> str:
    """Human-readable report with the conformance percentage and violation
    breakdowns. Percentages are printed with two decimals."""
    lines = [
        f"Traces checked:    {report.total_traces}",
        f"Conformant:        {report.conformant_traces}",
        f"Non-conformant:    {report.nonconformant_traces}",
        f"Conformance:       {report.conformance_percentage * 100:.2f}%",
    ]
    if report.total_traces == 0:
        lines.append("warning: empty corpus, nothing was checked")
    lines.append("")
    lines.append("Violations by kind (violations / traces affected):")
    for kind in ViolationKind:
        lines.append(
            f"  {kind.value:<20} {report.violations_by_kind.get(kind, 0):>10}"
            f" / {report.traces_by_kind.get(kind, 0)}"
        )
    lines.append("")
    lines.append("Violations by design span:")
    if report.violations_by_design_span:
        for (trace_id, span_id), count in sorted(report.violations_by_design_span.items()):
            lines.append(f"  {trace_id}/{span_id:<12} {count:>10}")
    else:
        lines.append("  none")
    return "\n".join(lines) + "\n"


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def render_trace_dot(design_set: DesignTraceSet, trace: ObservedTrace) -> str:
    """Render one observed trace as a DOT digraph with its verdict overlaid.

    Each observed span is a box labeled name, service, duration. Strict
    witnesses of required design spans are outlined green; spans witnessing
    a duration breach are outlined red; spans witnessing a disallowed
    pattern are filled red. Missing required design spans appear as dashed
    ghost nodes carrying the design description. Nodes are emitted in span
    id order, so identical inputs produce identical bytes.
    """
    verdict = check_trace(design_set, trace)

    duration_witnesses = set()
    disallowed_witnesses = set()
    missing: List[Violation] = []
    for violation in verdict.violations:
        if violation.kind is ViolationKind.DURATION_EXCEEDED:
            duration_witnesses.add(violation.observed_span_id)
        elif violation.kind is ViolationKind.DISALLOWED_PRESENT:
            disallowed_witnesses.add(violation.observed_span_id)
        else:
            missing.append(violation)

    matched: "set[Optional[SpanId]]" = set()
    witnesses_by_design: Dict[Tuple[str, str], Optional[SpanId]] = {}
    for design_trace in design_set.required_traces:
        for design_span_id, witness in match_witnesses(design_trace, trace).items():
            witnesses_by_design[(design_trace.design_trace_id, design_span_id)] = witness
            matched.add(witness)

    lines = [
        f'digraph "trace_{trace.trace_id}" {{',
        "  rankdir=TB;",
        '  node [shape=box, fontname="Helvetica"];',
    ]
    for span_id in sorted(trace.spans):
        span = trace.spans[span_id]
        label = "\\n".join(
            _dot_escape(part)
            for part in (span.name, span.service_name, f"{span.duration_micros} us")
        )
        if span_id in disallowed_witnesses:
            style = ', style=filled, fillcolor=red'
        elif span_id in duration_witnesses:
            style = ", color=red"
        elif span_id in matched:
            style = ", color=green"
        else:
            style = ""
        lines.append(f'  "{span_id}" [label="{label}"{style}];')

    designs_by_id = {t.design_trace_id: t for t in design_set.design_traces}
    for violation in sorted(missing, key=lambda v: (v.design_trace_id, v.design_span_id)):
        design_span = designs_by_id[violation.design_trace_id].spans[violation.design_span_id]
        ghost_id = f"missing_{violation.design_trace_id}_{violation.design_span_id}"
        label_parts = [f"missing: {design_span.name}"]
        if design_span.description:
            label_parts.append(design_span.description)
        label = "\\n".join(_dot_escape(part) for part in label_parts)
        lines.append(f'  "{ghost_id}" [label="{label}", style=dashed, color=red];')
        parent_id = design_span.parent_design_span_id
        if parent_id is not None:
            anchor = witnesses_by_design.get((violation.design_trace_id, parent_id))
            if anchor is not None:
                lines.append(f'  "{anchor}" -> "{ghost_id}" [style=dashed];')

    for span_id in sorted(trace.spans):
        span = trace.spans[span_id]
        if span.parent_span_id is not None and span.parent_span_id in trace.spans:
            lines.append(f'  "{span.parent_span_id}" -> "{span_id}";')

    lines.append("}")
    return "\n".join(lines) + "\n"
