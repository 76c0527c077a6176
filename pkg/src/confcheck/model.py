"""Shared domain model: observed spans and traces, design spans and traces,
violations, and per-trace verdicts.

Every type here is immutable after construction and safe to share across
worker processes. Observed-side types enforce their invariants at
construction time; design-side types are plain containers whose invariants
are enforced by :func:`confcheck.design.validate_design_trace`, so that a
design file with several problems can be reported in full rather than
failing on the first one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Optional, Tuple, Union

AttrValue = Union[str, int, float, bool]

SpanId = str
TraceId = str

SERVICE_NAME_KEY = "service.name"

SPAN_ID_LENGTH = 16
TRACE_ID_LENGTH = 32

_SPAN_ID_RE = re.compile(r"[0-9a-f]{16}")
_TRACE_ID_RE = re.compile(r"[0-9a-f]{32}")

_ZERO_SPAN_ID = "0" * SPAN_ID_LENGTH
_ZERO_TRACE_ID = "0" * TRACE_ID_LENGTH

_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1
_UINT64_MAX = 2**64 - 1


class CyclicParentChainError(ValueError):
    """Parent references within a single trace form a cycle."""


def validate_span_id(value: str) -> str:
    """Return ``value`` if it is a valid span id, else raise ``ValueError``.

    Span ids are 16 lowercase hex characters (8 bytes) and never all-zero.
    """
    if not isinstance(value, str) or _SPAN_ID_RE.fullmatch(value) is None:
        raise ValueError(f"span id must be {SPAN_ID_LENGTH} lowercase hex chars, got {value!r}")
    if value == _ZERO_SPAN_ID:
        raise ValueError("span id must not be all zeros")
    return value


def validate_trace_id(value: str) -> str:
    """Return ``value`` if it is a valid trace id, else raise ``ValueError``.

    Trace ids are 32 lowercase hex characters (16 bytes) and never all-zero.
    """
    if not isinstance(value, str) or _TRACE_ID_RE.fullmatch(value) is None:
        raise ValueError(f"trace id must be {TRACE_ID_LENGTH} lowercase hex chars, got {value!r}")
    if value == _ZERO_TRACE_ID:
        raise ValueError("trace id must not be all zeros")
    return value


def ensure_attr_value(key: str, value: object) -> AttrValue:
    """Validate a single attribute value and return it.

    Allowed types are str, bool, 64-bit signed int, and float. ``bool`` is
    checked before ``int`` because it is an ``int`` subclass in Python but a
    distinct attribute type here.
    """
    if isinstance(value, bool) or isinstance(value, (str, float)):
        return value
    if isinstance(value, int):
        if not _INT64_MIN <= value <= _INT64_MAX:
            raise ValueError(f"attribute {key!r}: integer {value} outside 64-bit signed range")
        return value
    raise ValueError(f"attribute {key!r}: unsupported value type {type(value).__name__}")


def attr_values_equal(a: AttrValue, b: AttrValue) -> bool:
    """Type-strict attribute equality.

    The integer 500 never equals the string "500", True never equals 1, and
    1 never equals 1.0. NaN compares equal to itself so the relation stays
    reflexive.
    """
    if type(a) is not type(b):
        return False
    if isinstance(a, float) and a != a:
        return b != b
    return a == b


@dataclass(frozen=True)
class ObservedSpan:
    """One recorded operation, as exported by a running system."""

    trace_id: TraceId
    span_id: SpanId
    name: str
    service_name: str
    start_time_nanos: int
    end_time_nanos: int
    parent_span_id: Optional[SpanId] = None
    attributes: Mapping[str, AttrValue] = field(default_factory=dict)
    links: Tuple[Tuple[TraceId, SpanId], ...] = ()

    def __post_init__(self) -> None:
        validate_trace_id(self.trace_id)
        validate_span_id(self.span_id)
        if self.parent_span_id is not None:
            validate_span_id(self.parent_span_id)
        if not isinstance(self.name, str):
            raise ValueError(f"span name must be a string, got {type(self.name).__name__}")
        if not self.service_name or not isinstance(self.service_name, str):
            raise ValueError("service_name must be a non-empty string")
        for bound, label in ((self.start_time_nanos, "start"), (self.end_time_nanos, "end")):
            if not isinstance(bound, int) or isinstance(bound, bool) or not 0 <= bound <= _UINT64_MAX:
                raise ValueError(f"{label} time must be an unsigned 64-bit nanosecond count, got {bound!r}")
        if self.end_time_nanos < self.start_time_nanos:
            raise ValueError(
                f"span {self.span_id}: end time {self.end_time_nanos} precedes start time {self.start_time_nanos}"
            )
        for key, value in self.attributes.items():
            ensure_attr_value(key, value)
        for link_trace_id, link_span_id in self.links:
            validate_trace_id(link_trace_id)
            validate_span_id(link_span_id)

    @property
    def duration_micros(self) -> int:
        """Span duration in whole microseconds, truncating."""
        return (self.end_time_nanos - self.start_time_nanos) // 1000

    def lookup_attribute(self, key: str) -> Optional[AttrValue]:
        """Look up ``key`` in the matching view of this span's attributes.

        The view is the span's own attributes plus the service name exposed
        under "service.name". The service name field wins over a same-named
        attribute so that resource identity cannot be spoofed per span.
        """
        if key == SERVICE_NAME_KEY:
            return self.service_name
        return self.attributes.get(key)


@dataclass(frozen=True)
class ObservedTrace:
    """The DAG of spans sharing one trace id.

    ``dangling_parents`` is derived at construction: the ids of spans whose
    ``parent_span_id`` names no span in this trace. Such spans act as chain
    terminals during ancestor walks. Parent cycles are rejected here.
    """

    trace_id: TraceId
    spans: Mapping[SpanId, ObservedSpan]
    dangling_parents: frozenset = field(init=False)

    def __post_init__(self) -> None:
        validate_trace_id(self.trace_id)
        dangling = set()
        for span_id, span in self.spans.items():
            if span.span_id != span_id:
                raise ValueError(f"span map key {span_id} does not match span id {span.span_id}")
            if span.trace_id != self.trace_id:
                raise ValueError(
                    f"span {span.span_id} belongs to trace {span.trace_id}, not {self.trace_id}"
                )
            if span.parent_span_id is not None and span.parent_span_id not in self.spans:
                dangling.add(span_id)
        self._reject_parent_cycles()
        object.__setattr__(self, "dangling_parents", frozenset(dangling))

    def _reject_parent_cycles(self) -> None:
        done: dict = {}
        for start in self.spans:
            if start in done:
                continue
            path: list = []
            on_path = set()
            current: Optional[str] = start
            while current is not None and current in self.spans and current not in done:
                if current in on_path:
                    cycle = path[path.index(current):]
                    raise CyclicParentChainError(
                        f"trace {self.trace_id}: parent chain cycle through {' -> '.join(cycle)}"
                    )
                path.append(current)
                on_path.add(current)
                current = self.spans[current].parent_span_id
            for span_id in path:
                done[span_id] = True

    @classmethod
    def from_spans(cls, trace_id: TraceId, spans: "list[ObservedSpan]") -> "ObservedTrace":
        by_id: dict = {}
        for span in spans:
            if span.span_id in by_id:
                raise ValueError(f"duplicate span id {span.span_id} in trace {trace_id}")
            by_id[span.span_id] = span
        return cls(trace_id=trace_id, spans=by_id)

    def parent_of(self, span: ObservedSpan) -> Optional[ObservedSpan]:
        """The resolved parent span, or None for roots and dangling parents."""
        if span.parent_span_id is None:
            return None
        return self.spans.get(span.parent_span_id)

    def ancestors_of(self, span: ObservedSpan) -> Iterator[ObservedSpan]:
        """Walk strict ancestors from the immediate parent up to a root or
        dangling terminal. Bounded because parent cycles are rejected."""
        current = self.parent_of(span)
        while current is not None:
            yield current
            current = self.parent_of(current)


@dataclass(frozen=True)
class DesignSpan:
    """A designer-authored span pattern.

    ``match_attributes`` must contain "service.name" and ``max_duration_micros``
    must be positive for the pattern to be usable; both are reported by
    :func:`confcheck.design.validate_design_trace` rather than raised here.
    """

    design_span_id: str
    name: str
    match_attributes: Mapping[str, AttrValue]
    parent_design_span_id: Optional[str] = None
    description: Optional[str] = None
    max_duration_micros: Optional[int] = None
    allow_non_immediate_parent: bool = False
    is_disallowed: bool = False

    def __post_init__(self) -> None:
        if not self.design_span_id or not isinstance(self.design_span_id, str):
            raise ValueError("design_span_id must be a non-empty string")
        if not isinstance(self.name, str):
            raise ValueError("design span name must be a string")
        for key, value in self.match_attributes.items():
            ensure_attr_value(key, value)
        if self.max_duration_micros is not None and (
            isinstance(self.max_duration_micros, bool) or not isinstance(self.max_duration_micros, int)
        ):
            raise ValueError("max_duration_micros must be an integer microsecond count")


@dataclass(frozen=True)
class DesignTrace:
    """A tree (forest) of design spans forming one required or disallowed
    pattern. All spans of one design trace share the same disallowed flag;
    see :func:`confcheck.design.validate_design_trace`."""

    design_trace_id: str
    spans: Mapping[str, DesignSpan]

    def __post_init__(self) -> None:
        if not self.design_trace_id or not isinstance(self.design_trace_id, str):
            raise ValueError("design_trace_id must be a non-empty string")
        for span_id, span in self.spans.items():
            if span.design_span_id != span_id:
                raise ValueError(
                    f"design span map key {span_id} does not match span id {span.design_span_id}"
                )

    @property
    def is_disallowed(self) -> bool:
        """The shared disallowed flag; meaningful only for validated traces."""
        return any(span.is_disallowed for span in self.spans.values())

    def spans_in_order(self) -> "list[DesignSpan]":
        return [self.spans[span_id] for span_id in sorted(self.spans)]


class ViolationKind(Enum):
    MISSING_REQUIRED = "missingRequired"
    DURATION_EXCEEDED = "durationExceeded"
    DISALLOWED_PRESENT = "disallowedPresent"


@dataclass(frozen=True)
class Violation:
    """One rule breach found while checking a trace.

    MissingRequired carries no observed span (there is nothing to point at);
    the other kinds always carry the witnessing observed span.
    """

    kind: ViolationKind
    design_trace_id: str
    design_span_id: str
    observed_span_id: Optional[SpanId] = None

    def __post_init__(self) -> None:
        if self.kind is ViolationKind.MISSING_REQUIRED:
            if self.observed_span_id is not None:
                raise ValueError("a missing-required violation cannot carry an observed span id")
        elif self.observed_span_id is None:
            raise ValueError(f"a {self.kind.value} violation must carry an observed span id")
        else:
            validate_span_id(self.observed_span_id)


@dataclass(frozen=True)
class TraceVerdict:
    """Per-trace conformance outcome. A trace is conformant exactly when it
    has no violations; the flag is derived so the two can never disagree."""

    trace_id: TraceId
    violations: Tuple[Violation, ...]

    @property
    def conformant(self) -> bool:
        return not self.violations
