"""Deterministic workload generator for the gateway/microservice topology.

Each simulated request produces a trace shaped like the bundled design set
expects: a gateway request span, an outbound client span under it, a
microservice request span below that (a non-immediate descendant of the
root, which exercises full-parent-tree matching), and a database query on
the microservice. Extra noise spans that match no design pattern are hung
off random spans.

Three deviations can be injected, each controlled by an independent
probability: omitting the microservice query, inflating the root duration
past its budget, and adding a gateway-side database query. Every random
draw comes from a counter-derived sub-stream keyed by (seed, trace index,
purpose), so corpora are byte-reproducible and the three deviation knobs
are fully orthogonal: changing one probability never changes which traces
receive the other deviations.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

from .ingest import serialize_otel_json
from .model import ObservedSpan, ObservedTrace

__all__ = ["SimConfig", "generate_trace", "generate_corpus", "write_corpus"]

GATEWAY = "gateway"
MICROSERVICE = "microservice"
REQUEST_SPAN_NAME = "aspnet_core.request"
QUERY_SPAN_NAME = "sql_server.query"
CLIENT_SPAN_NAME = "http.client"

# None of these name/service combinations can witness a design span from the
# bundled design set, so injected deviations stay the sole source of
# non-conformance.
NOISE_SPAN_NAMES = ("connection.open", "serialization", "dns.lookup")
NOISE_SERVICES = (GATEWAY, MICROSERVICE, "testapp")

# Root duration budget of the bundled design set's required flow.
ROOT_BUDGET_MICROS = 500_000

_BASE_EPOCH_NANOS = 1_600_000_000 * 10**9

# Fixed span ordinals, so ids are stable regardless of which deviations fire.
_ORD_ROOT = 0
_ORD_CLIENT = 1
_ORD_MS_REQUEST = 2
_ORD_MS_QUERY = 3
_ORD_DIRECT_QUERY = 4
_ORD_NOISE_BASE = 5


@dataclass(frozen=True)
class SimConfig:
    """Generator parameters. Identical configs yield byte-identical corpora."""

    seed: int
    trace_count: int
    p_omit: float = 0.0
    p_slow: float = 0.0
    p_direct: float = 0.0
    base_latency_micros: Tuple[int, int] = (50_000, 400_000)
    slow_latency_micros: Tuple[int, int] = (500_001, 900_000)
    noise_spans_per_trace: Tuple[int, int] = (2, 5)

    def __post_init__(self) -> None:
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not isinstance(self.trace_count, int) or self.trace_count < 1:
            raise ValueError(f"trace_count must be a positive integer, got {self.trace_count!r}")
        for label, p in (("p_omit", self.p_omit), ("p_slow", self.p_slow), ("p_direct", self.p_direct)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{label} must be a probability in [0, 1], got {p!r}")
        for label, (low, high) in (
            ("base_latency_micros", self.base_latency_micros),
            ("slow_latency_micros", self.slow_latency_micros),
            ("noise_spans_per_trace", self.noise_spans_per_trace),
        ):
            if low < 0 or low > high:
                raise ValueError(f"{label} must satisfy 0 <= min <= max, got {(low, high)!r}")
        if self.slow_latency_micros[0] <= ROOT_BUDGET_MICROS:
            raise ValueError(
                f"slow_latency_micros must lie entirely above the {ROOT_BUDGET_MICROS} us root budget"
            )


def _substream(seed: int, index: int, purpose: str) -> random.Random:
    """Deterministic per-trace, per-purpose random stream.

    The stream seed is the first 8 bytes of blake2b over (seed, index,
    purpose), making the streams independent of each other and of trace
    scheduling.
    """
    digest = hashlib.blake2b(f"{seed}:{index}:{purpose}".encode(), digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big"))


def _hex_id(material: str, n_bytes: int) -> str:
    digest = hashlib.blake2b(material.encode(), digest_size=n_bytes).hexdigest()
    if set(digest) == {"0"}:
        digest = digest[:-1] + "1"
    return digest


def _trace_id_for(seed: int, index: int) -> str:
    return _hex_id(f"{seed}:{index}:trace", 16)


def _span_id_for(seed: int, index: int, ordinal: int) -> str:
    return _hex_id(f"{seed}:{index}:span:{ordinal}", 8)


def deviation_flags(config: SimConfig, index: int) -> Tuple[bool, bool, bool]:
    """The (omit, slow, direct) deviation draws for one trace index."""
    return (
        _substream(config.seed, index, "omit").random() < config.p_omit,
        _substream(config.seed, index, "slow").random() < config.p_slow,
        _substream(config.seed, index, "direct").random() < config.p_direct,
    )


def generate_trace(config: SimConfig, index: int) -> ObservedTrace:
    """Generate the trace for one request index."""
    omit, slow, direct = deviation_flags(config, index)
    shape = _substream(config.seed, index, "shape")
    trace_id = _trace_id_for(config.seed, index)
    root_start = _BASE_EPOCH_NANOS + index * 1_000_000_000

    def span(
        ordinal: int,
        name: str,
        service: str,
        parent_span_id: "str | None",
        start_nanos: int,
        duration_micros: int,
        attributes: "dict | None" = None,
    ) -> ObservedSpan:
        return ObservedSpan(
            trace_id=trace_id,
            span_id=_span_id_for(config.seed, index, ordinal),
            parent_span_id=parent_span_id,
            name=name,
            service_name=service,
            start_time_nanos=start_nanos,
            end_time_nanos=start_nanos + duration_micros * 1000,
            attributes=attributes or {},
        )

    def ordinal_id(ordinal: int) -> str:
        return _span_id_for(config.seed, index, ordinal)

    # The shape stream is consumed identically whether or not deviations
    # fire, so the trace layout depends only on (seed, index).
    base_duration = shape.randint(*config.base_latency_micros)
    client_offset = shape.randint(500, 2_000)
    ms_offset = shape.randint(500, 2_000)
    query_offset = shape.randint(200, 1_000)
    query_duration = shape.randint(1_000, 20_000)
    http_method = shape.choice(("GET", "POST"))

    root_duration = base_duration
    if slow:
        root_duration = _substream(config.seed, index, "slow-latency").randint(
            *config.slow_latency_micros
        )

    client_duration = max(1, (root_duration * 3) // 4)
    ms_duration = max(1, (client_duration * 4) // 5)

    spans = [
        span(
            _ORD_ROOT,
            REQUEST_SPAN_NAME,
            GATEWAY,
            None,
            root_start,
            root_duration,
            {"http.method": http_method, "http.status_code": 200},
        ),
        span(
            _ORD_CLIENT,
            CLIENT_SPAN_NAME,
            GATEWAY,
            ordinal_id(_ORD_ROOT),
            root_start + client_offset * 1000,
            client_duration,
        ),
        span(
            _ORD_MS_REQUEST,
            REQUEST_SPAN_NAME,
            MICROSERVICE,
            ordinal_id(_ORD_CLIENT),
            root_start + (client_offset + ms_offset) * 1000,
            ms_duration,
        ),
    ]
    if not omit:
        spans.append(
            span(
                _ORD_MS_QUERY,
                QUERY_SPAN_NAME,
                MICROSERVICE,
                ordinal_id(_ORD_MS_REQUEST),
                root_start + (client_offset + ms_offset + query_offset) * 1000,
                query_duration,
                {"db.system": "mssql"},
            )
        )
    if direct:
        direct_stream = _substream(config.seed, index, "direct-shape")
        spans.append(
            span(
                _ORD_DIRECT_QUERY,
                QUERY_SPAN_NAME,
                GATEWAY,
                ordinal_id(_ORD_ROOT),
                root_start + direct_stream.randint(200, 2_000) * 1000,
                direct_stream.randint(1_000, 20_000),
                {"db.system": "mssql"},
            )
        )

    # Noise spans are leaves under random parents; they never re-parent the
    # core chain, so they cannot alter conformance.
    noise_count = shape.randint(*config.noise_spans_per_trace)
    for noise_index in range(noise_count):
        parent = shape.choice(spans)
        spans.append(
            span(
                _ORD_NOISE_BASE + noise_index,
                shape.choice(NOISE_SPAN_NAMES),
                shape.choice(NOISE_SERVICES),
                parent.span_id,
                parent.start_time_nanos + shape.randint(10, 500) * 1000,
                shape.randint(10, 5_000),
            )
        )

    return ObservedTrace.from_spans(trace_id, spans)


def generate_corpus(config: SimConfig) -> List[ObservedTrace]:
    """Generate the full corpus for a config. Deterministic: identical
    configs yield identical traces, independent of scheduling."""
    return [generate_trace(config, index) for index in range(config.trace_count)]


def write_corpus(
    traces: List[ObservedTrace],
    directory: "Path | str",
    traces_per_file: int,
) -> int:
    """Write traces to ``corpus-%06d.json`` files in the canonical OTel-style
    layout, ``traces_per_file`` per file. Returns the file count."""
    if traces_per_file < 1:
        raise ValueError(f"traces_per_file must be a positive integer, got {traces_per_file}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    file_count = 0
    for start in range(0, len(traces), traces_per_file):
        batch = traces[start : start + traces_per_file]
        path = directory / f"corpus-{file_count:06d}.json"
        path.write_text(serialize_otel_json(batch), encoding="utf-8")
        file_count += 1
    return file_count
