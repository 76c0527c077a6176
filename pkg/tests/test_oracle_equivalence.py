"""The production checker against the brute-force reference matcher."""

from __future__ import annotations

import random

from confcheck.checker import MatchContext, chain_matches, check_trace
from confcheck.design import DesignTraceSet
from confcheck.model import DesignSpan, DesignTrace, ObservedSpan, ObservedTrace

import genutil
import oracle

TRACE_ID = "0" * 31 + "1"


def test_randomized_equivalence_small_sample():
    # The full thousand-instance sweep runs in the acceptance suite; this
    # keeps a quick regression signal in the unit run.
    assert oracle.run_equivalence_instances(200, seed=1234) == 200


def test_unmatched_ancestor_chain_rejected_and_oracle_agrees(design_set):
    # A microservice request whose ancestors contain no matching gateway
    # request must not witness the pattern that requires one.
    spans = [
        ObservedSpan(
            trace_id=TRACE_ID,
            span_id="00000000000000b2",
            name="http.client",
            service_name="gateway",
            start_time_nanos=0,
            end_time_nanos=1000,
        ),
        ObservedSpan(
            trace_id=TRACE_ID,
            span_id="00000000000000c3",
            parent_span_id="00000000000000b2",
            name="aspnet_core.request",
            service_name="microservice",
            start_time_nanos=0,
            end_time_nanos=1000,
        ),
    ]
    trace = ObservedTrace.from_spans(TRACE_ID, spans)
    required = design_set.required_traces[0]
    ctx = MatchContext(required, trace)
    assert not chain_matches(required.spans["B"], trace.spans["00000000000000c3"], ctx)
    assert "00000000000000c3" not in oracle.structural_witnesses(
        required, trace, required.spans["B"]
    )
    assert oracle.oracle_check_trace(design_set, trace) == check_trace(design_set, trace)


def test_partial_disallowed_pattern_silent_and_oracle_agrees(design_set):
    # Only the anchor of the disallowed pattern is present; neither engine
    # may emit a violation for it.
    spans = [
        ObservedSpan(
            trace_id=TRACE_ID,
            span_id="00000000000000a1",
            name="aspnet_core.request",
            service_name="gateway",
            start_time_nanos=0,
            end_time_nanos=1000,
        )
    ]
    trace = ObservedTrace.from_spans(TRACE_ID, spans)
    got = check_trace(design_set, trace)
    want = oracle.oracle_check_trace(design_set, trace)
    assert got == want
    assert all(v.design_trace_id != "gateway-db-access" for v in got.violations)


def test_deep_chain_with_repeated_attributes():
    # Every span looks alike, so chain validation alone decides; this is the
    # worst case for the memoized recursion and easy for the oracle.
    spans = []
    previous = None
    for index in range(8):
        span_id = f"{index + 1:016x}"
        spans.append(
            ObservedSpan(
                trace_id=TRACE_ID,
                span_id=span_id,
                parent_span_id=previous,
                name="op",
                service_name="svc",
                start_time_nanos=0,
                end_time_nanos=1000,
            )
        )
        previous = span_id
    trace = ObservedTrace.from_spans(TRACE_ID, spans)

    design_spans = {}
    parent = None
    for index in range(4):
        span_id = f"d{index}"
        design_spans[span_id] = DesignSpan(
            design_span_id=span_id,
            name="op",
            match_attributes={"service.name": "svc"},
            parent_design_span_id=parent,
            allow_non_immediate_parent=index % 2 == 1,
        )
        parent = span_id
    design_set = DesignTraceSet.of(
        [DesignTrace(design_trace_id="deep", spans=design_spans)]
    )
    assert check_trace(design_set, trace) == oracle.oracle_check_trace(design_set, trace)


def test_equivalence_holds_on_handpicked_seeds():
    for seed in (0, 1, 7, 99, 2**31):
        rng = random.Random(seed)
        design_set = genutil.random_design_set(rng)
        trace = genutil.random_observed_trace(rng)
        assert check_trace(design_set, trace) == oracle.oracle_check_trace(design_set, trace)
