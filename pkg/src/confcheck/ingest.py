"""Ingestion of exported trace files.

Two file formats are understood: Zipkin v2 JSON (a top-level array of span
objects) and an OpenTelemetry-style resource-grouped layout (a top-level
object with a ``resourceSpans`` array). The latter is also the canonical
storage format this package writes, so ``parse_otel_json`` and
``serialize_otel_json`` round-trip exactly.

Parsers normalize raw spans into :class:`~confcheck.model.ObservedSpan`;
``assemble_traces`` groups normalized spans into per-trace DAGs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

from .model import (
    AttrValue,
    CyclicParentChainError,
    ObservedSpan,
    ObservedTrace,
    SERVICE_NAME_KEY,
    SpanId,
    TRACE_ID_LENGTH,
    TraceId,
)

__all__ = [
    "IngestWarning",
    "IngestWarningKind",
    "MalformedDocumentError",
    "MissingFieldError",
    "MissingServiceNameError",
    "DuplicateSpanIdError",
    "CyclicParentChainError",
    "parse_zipkin_v2",
    "parse_otel_json",
    "parse_trace_document",
    "assemble_traces",
    "serialize_otel_json",
    "load_corpus_dir",
]


class MalformedDocumentError(ValueError):
    """The document is not valid JSON or does not have the expected shape."""


class MissingFieldError(MalformedDocumentError):
    """A span object lacks a field required to identify or place it."""


class MissingServiceNameError(MalformedDocumentError):
    """A resource entry lacks the service.name attribute, which means the
    export came from an uninstrumented resource."""


class DuplicateSpanIdError(ValueError):
    """Two spans share the same (trace id, span id); the export is corrupt."""


class IngestWarningKind(Enum):
    DANGLING_PARENT = "danglingParent"
    DUPLICATE_SPAN_ID = "duplicateSpanId"
    CLAMPED_TIMESTAMP = "clampedTimestamp"


@dataclass(frozen=True)
class IngestWarning:
    kind: IngestWarningKind
    trace_id: TraceId
    span_id: SpanId
    detail: str


def _normalize_parent_id(raw: object) -> Optional[str]:
    # Empty-string and all-zero parent ids both mean "root" in real exports.
    if raw is None:
        return None
    if not isinstance(raw, str):
        raise MalformedDocumentError(f"parent span id must be a string, got {type(raw).__name__}")
    if raw == "" or set(raw) == {"0"}:
        return None
    return raw


def _pad_trace_id(raw: str) -> str:
    return raw.rjust(TRACE_ID_LENGTH, "0")


def _load_json(document: "bytes | str") -> object:
    try:
        return json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedDocumentError(f"invalid JSON: {exc}") from exc


def _clamp_times(
    start: int,
    end: int,
    trace_id: str,
    span_id: str,
    warnings: "Optional[list[IngestWarning]]",
) -> Tuple[int, int]:
    if end < start:
        if warnings is not None:
            warnings.append(
                IngestWarning(
                    kind=IngestWarningKind.CLAMPED_TIMESTAMP,
                    trace_id=trace_id,
                    span_id=span_id,
                    detail=f"end time {end} precedes start time {start}; clamped to start",
                )
            )
        end = start
    return start, end


def parse_zipkin_v2(
    document: "bytes | str",
    warnings: "Optional[list[IngestWarning]]" = None,
) -> List[ObservedSpan]:
    """Parse a Zipkin v2 JSON array into observed spans.

    Zipkin timestamps and durations are in microseconds and are converted to
    nanoseconds. Trace ids shorter than 32 chars are left-padded with zeros
    (Zipkin permits 64-bit trace ids). Tags become string-typed attributes,
    matching Zipkin's string-only tag model.
    """
    data = _load_json(document)
    if not isinstance(data, list):
        raise MalformedDocumentError("a Zipkin v2 export must be a JSON array of spans")

    spans: List[ObservedSpan] = []
    for index, raw in enumerate(data):
        if not isinstance(raw, dict):
            raise MalformedDocumentError(f"span #{index} is not an object")
        raw_trace_id = raw.get("traceId")
        raw_span_id = raw.get("id")
        if not raw_trace_id or not raw_span_id:
            raise MissingFieldError(f"span #{index} lacks id or traceId")
        if not isinstance(raw_trace_id, str) or not isinstance(raw_span_id, str):
            raise MalformedDocumentError(f"span #{index}: id and traceId must be strings")
        trace_id = _pad_trace_id(raw_trace_id)

        endpoint = raw.get("localEndpoint")
        service_name = endpoint.get("serviceName") if isinstance(endpoint, dict) else None
        if not service_name:
            raise MissingFieldError(f"span {raw_span_id} lacks localEndpoint.serviceName")

        timestamp_micros = raw.get("timestamp", 0)
        duration_micros = raw.get("duration", 0)
        if isinstance(timestamp_micros, bool) or not isinstance(timestamp_micros, int):
            raise MalformedDocumentError(f"span {raw_span_id}: timestamp must be an integer")
        if isinstance(duration_micros, bool) or not isinstance(duration_micros, int):
            raise MalformedDocumentError(f"span {raw_span_id}: duration must be an integer")
        start = timestamp_micros * 1000
        end = (timestamp_micros + duration_micros) * 1000
        start, end = _clamp_times(start, end, trace_id, raw_span_id, warnings)

        tags = raw.get("tags", {})
        if not isinstance(tags, dict):
            raise MalformedDocumentError(f"span {raw_span_id}: tags must be an object")
        attributes = {key: value if isinstance(value, str) else str(value) for key, value in tags.items()}

        try:
            spans.append(
                ObservedSpan(
                    trace_id=trace_id,
                    span_id=raw_span_id,
                    parent_span_id=_normalize_parent_id(raw.get("parentId")),
                    name=raw.get("name", ""),
                    service_name=service_name,
                    start_time_nanos=start,
                    end_time_nanos=end,
                    attributes=attributes,
                )
            )
        except ValueError as exc:
            raise MalformedDocumentError(f"span {raw_span_id}: {exc}") from exc
    return spans


def _attr_value_from_json(value: object) -> Optional[AttrValue]:
    """Decode one OTel-style attribute value object. Returns None for value
    kinds outside the four scalar types (arrays, kvlists), which are ignored."""
    if not isinstance(value, dict):
        raise MalformedDocumentError(f"attribute value must be an object, got {type(value).__name__}")
    if "stringValue" in value:
        raw = value["stringValue"]
        if not isinstance(raw, str):
            raise MalformedDocumentError("stringValue must hold a string")
        return raw
    if "boolValue" in value:
        raw = value["boolValue"]
        if not isinstance(raw, bool):
            raise MalformedDocumentError("boolValue must hold a boolean")
        return raw
    if "intValue" in value:
        raw = value["intValue"]
        # Protobuf JSON encodes 64-bit integers as strings; plain numbers
        # appear in hand-written files.
        if isinstance(raw, bool) or not isinstance(raw, (str, int)):
            raise MalformedDocumentError("intValue must hold an integer or its string form")
        try:
            return int(raw)
        except ValueError as exc:
            raise MalformedDocumentError(f"intValue {raw!r} is not an integer") from exc
    if "doubleValue" in value:
        raw = value["doubleValue"]
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise MalformedDocumentError("doubleValue must hold a number")
        return float(raw)
    return None


def _attrs_from_json(raw_attrs: object, context: str) -> dict:
    if raw_attrs is None:
        return {}
    if not isinstance(raw_attrs, list):
        raise MalformedDocumentError(f"{context}: attributes must be a list")
    attributes = {}
    for entry in raw_attrs:
        if not isinstance(entry, dict) or "key" not in entry:
            raise MalformedDocumentError(f"{context}: attribute entries must be objects with a key")
        value = _attr_value_from_json(entry.get("value", {}))
        if value is not None:
            attributes[entry["key"]] = value
    return attributes


def _time_from_json(raw: object, field_name: str, span_id: str) -> int:
    if raw is None:
        return 0
    if isinstance(raw, bool):
        raise MalformedDocumentError(f"span {span_id}: {field_name} must be an integer")
    if isinstance(raw, (str, int)):
        try:
            return int(raw)
        except ValueError as exc:
            raise MalformedDocumentError(f"span {span_id}: {field_name} {raw!r} is not an integer") from exc
    raise MalformedDocumentError(f"span {span_id}: {field_name} must be an integer or string")


def parse_otel_json(
    document: "bytes | str",
    warnings: "Optional[list[IngestWarning]]" = None,
) -> List[ObservedSpan]:
    """Parse the resource-grouped OTel-style JSON layout into observed spans.

    Each ``resourceSpans`` entry must carry a ``service.name`` resource
    attribute; every span under it inherits that service name. Typed
    attribute values are preserved.
    """
    data = _load_json(document)
    if not isinstance(data, dict) or not isinstance(data.get("resourceSpans"), list):
        raise MalformedDocumentError("expected a JSON object with a resourceSpans array")

    spans: List[ObservedSpan] = []
    for entry_index, entry in enumerate(data["resourceSpans"]):
        if not isinstance(entry, dict):
            raise MalformedDocumentError(f"resourceSpans[{entry_index}] is not an object")
        resource = entry.get("resource", {})
        if not isinstance(resource, dict):
            raise MalformedDocumentError(f"resourceSpans[{entry_index}]: resource must be an object")
        resource_attrs = _attrs_from_json(resource.get("attributes"), f"resourceSpans[{entry_index}]")
        service_name = resource_attrs.get(SERVICE_NAME_KEY)
        if not isinstance(service_name, str) or not service_name:
            raise MissingServiceNameError(
                f"resourceSpans[{entry_index}] lacks a service.name resource attribute"
            )

        scope_spans = entry.get("scopeSpans", [])
        if not isinstance(scope_spans, list):
            raise MalformedDocumentError(f"resourceSpans[{entry_index}]: scopeSpans must be a list")
        for scope_entry in scope_spans:
            if not isinstance(scope_entry, dict):
                raise MalformedDocumentError(f"resourceSpans[{entry_index}]: scopeSpans entries must be objects")
            for raw in scope_entry.get("spans", []):
                if not isinstance(raw, dict):
                    raise MalformedDocumentError("span entries must be objects")
                trace_id = raw.get("traceId")
                span_id = raw.get("spanId")
                if not trace_id or not span_id:
                    raise MissingFieldError("a span lacks spanId or traceId")
                start = _time_from_json(raw.get("startTimeUnixNano"), "startTimeUnixNano", span_id)
                end = _time_from_json(raw.get("endTimeUnixNano"), "endTimeUnixNano", span_id)
                start, end = _clamp_times(start, end, trace_id, span_id, warnings)
                links_raw = raw.get("links", [])
                if not isinstance(links_raw, list):
                    raise MalformedDocumentError(f"span {span_id}: links must be a list")
                links = []
                for link in links_raw:
                    if not isinstance(link, dict) or "traceId" not in link or "spanId" not in link:
                        raise MalformedDocumentError(f"span {span_id}: links must carry traceId and spanId")
                    links.append((link["traceId"], link["spanId"]))
                try:
                    spans.append(
                        ObservedSpan(
                            trace_id=trace_id,
                            span_id=span_id,
                            parent_span_id=_normalize_parent_id(raw.get("parentSpanId")),
                            name=raw.get("name", ""),
                            service_name=service_name,
                            start_time_nanos=start,
                            end_time_nanos=end,
                            attributes=_attrs_from_json(raw.get("attributes"), f"span {span_id}"),
                            links=tuple(links),
                        )
                    )
                except ValueError as exc:
                    raise MalformedDocumentError(f"span {span_id}: {exc}") from exc
    return spans


def parse_trace_document(
    document: "bytes | str",
    warnings: "Optional[list[IngestWarning]]" = None,
) -> List[ObservedSpan]:
    """Parse a trace export of either supported format, auto-detected by the
    top-level JSON shape: an array is Zipkin v2, an object with
    ``resourceSpans`` is the OTel-style layout."""
    data = _load_json(document)
    if isinstance(data, list):
        return parse_zipkin_v2(document, warnings)
    if isinstance(data, dict) and "resourceSpans" in data:
        return parse_otel_json(document, warnings)
    raise MalformedDocumentError(
        "unrecognized trace document: expected a Zipkin v2 array or an object with resourceSpans"
    )


def assemble_traces(spans: Iterable[ObservedSpan]) -> Tuple[List[ObservedTrace], List[IngestWarning]]:
    """Group spans by trace id into ObservedTrace DAGs.

    Spans whose parent is absent from their group are kept and reported via
    DanglingParent warnings; they act as chain terminals during ancestor
    walks. Output traces are sorted by trace id and the result does not
    depend on input span order.

    Raises DuplicateSpanIdError when two spans share (trace id, span id) and
    CyclicParentChainError when parent references loop.
    """
    grouped: "dict[TraceId, dict[SpanId, ObservedSpan]]" = {}
    for span in spans:
        group = grouped.setdefault(span.trace_id, {})
        if span.span_id in group:
            raise DuplicateSpanIdError(
                f"trace {span.trace_id}: duplicate span id {span.span_id}"
            )
        group[span.span_id] = span

    traces = []
    warnings: List[IngestWarning] = []
    for trace_id in sorted(grouped):
        trace = ObservedTrace(trace_id=trace_id, spans=grouped[trace_id])
        traces.append(trace)
        for span_id in sorted(trace.dangling_parents):
            parent_id = trace.spans[span_id].parent_span_id
            warnings.append(
                IngestWarning(
                    kind=IngestWarningKind.DANGLING_PARENT,
                    trace_id=trace_id,
                    span_id=span_id,
                    detail=f"parent span {parent_id} is not present in the trace",
                )
            )
    return traces, warnings


def _attr_value_to_json(value: AttrValue) -> dict:
    if isinstance(value, bool):
        return {"boolValue": value}
    if isinstance(value, str):
        return {"stringValue": value}
    if isinstance(value, int):
        return {"intValue": str(value)}
    return {"doubleValue": value}


def _attrs_to_json(attributes: "dict | object") -> list:
    return [
        {"key": key, "value": _attr_value_to_json(attributes[key])}
        for key in sorted(attributes)
    ]


def _span_to_json(span: ObservedSpan) -> dict:
    out: dict = {"traceId": span.trace_id, "spanId": span.span_id}
    if span.parent_span_id is not None:
        out["parentSpanId"] = span.parent_span_id
    out["name"] = span.name
    out["startTimeUnixNano"] = str(span.start_time_nanos)
    out["endTimeUnixNano"] = str(span.end_time_nanos)
    if span.attributes:
        out["attributes"] = _attrs_to_json(span.attributes)
    if span.links:
        out["links"] = [{"traceId": t, "spanId": s} for t, s in span.links]
    return out


def serialize_otel_json(traces: Iterable[ObservedTrace]) -> str:
    """Serialize traces to the canonical OTel-style layout.

    Spans are grouped into one resource entry per service name; entries are
    sorted by service name and spans by (trace id, span id), so identical
    inputs always produce identical bytes.
    """
    by_service: "dict[str, list[ObservedSpan]]" = {}
    for trace in traces:
        for span in trace.spans.values():
            by_service.setdefault(span.service_name, []).append(span)

    resource_entries = []
    for service_name in sorted(by_service):
        service_spans = sorted(by_service[service_name], key=lambda s: (s.trace_id, s.span_id))
        resource_entries.append(
            {
                "resource": {
                    "attributes": [
                        {"key": SERVICE_NAME_KEY, "value": {"stringValue": service_name}}
                    ]
                },
                "scopeSpans": [
                    {
                        "scope": {"name": "confcheck"},
                        "spans": [_span_to_json(span) for span in service_spans],
                    }
                ],
            }
        )
    return json.dumps({"resourceSpans": resource_entries}, separators=(",", ":"))


def load_corpus_dir(directory: "Path | str") -> Tuple[List[ObservedTrace], List[IngestWarning]]:
    """Ingest every ``*.json`` file in a directory, auto-detecting formats,
    and assemble the combined span set into traces."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"corpus directory {directory} does not exist")
    warnings: List[IngestWarning] = []
    spans: List[ObservedSpan] = []
    for path in sorted(directory.glob("*.json")):
        try:
            spans.extend(parse_trace_document(path.read_bytes(), warnings))
        except MalformedDocumentError as exc:
            raise MalformedDocumentError(f"{path.name}: {exc}") from exc
    traces, assembly_warnings = assemble_traces(spans)
    warnings.extend(assembly_warnings)
    return traces, warnings
