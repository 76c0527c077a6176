"""Deterministic workload generation and deviation injection."""

from __future__ import annotations

import math

import pytest

from confcheck.checker import check_corpus, check_trace
from confcheck.ingest import load_corpus_dir, serialize_otel_json
from confcheck.model import ViolationKind
from confcheck.simulator import (
    GATEWAY,
    MICROSERVICE,
    QUERY_SPAN_NAME,
    SimConfig,
    deviation_flags,
    generate_corpus,
    generate_trace,
    write_corpus,
)


class TestConfigValidation:
    def test_defaults_are_valid(self):
        SimConfig(seed=0, trace_count=1)

    @pytest.mark.parametrize("p", [-0.1, 1.5])
    def test_probabilities_must_be_in_range(self, p):
        with pytest.raises(ValueError):
            SimConfig(seed=0, trace_count=1, p_slow=p)

    @pytest.mark.parametrize("count", [0, -1])
    def test_trace_count_must_be_positive(self, count):
        with pytest.raises(ValueError):
            SimConfig(seed=0, trace_count=count)

    def test_slow_range_must_exceed_budget(self):
        with pytest.raises(ValueError):
            SimConfig(seed=0, trace_count=1, slow_latency_micros=(400_000, 900_000))

    def test_ranges_must_be_ordered(self):
        with pytest.raises(ValueError):
            SimConfig(seed=0, trace_count=1, base_latency_micros=(400_000, 50_000))

    def test_seed_must_be_uint64(self):
        with pytest.raises(ValueError):
            SimConfig(seed=-1, trace_count=1)
        with pytest.raises(ValueError):
            SimConfig(seed=2**64, trace_count=1)


class TestDeterminism:
    def test_identical_configs_yield_identical_corpora(self):
        config = SimConfig(seed=9, trace_count=25, p_omit=0.3, p_slow=0.3, p_direct=0.3)
        first = generate_corpus(config)
        second = generate_corpus(config)
        assert first == second
        assert serialize_otel_json(first) == serialize_otel_json(second)

    def test_different_seeds_differ(self):
        a = generate_corpus(SimConfig(seed=1, trace_count=5))
        b = generate_corpus(SimConfig(seed=2, trace_count=5))
        assert serialize_otel_json(a) != serialize_otel_json(b)

    def test_trace_ids_unique(self):
        corpus = generate_corpus(SimConfig(seed=3, trace_count=500))
        assert len({t.trace_id for t in corpus}) == 500


class TestHealthyTraces:
    def test_zero_probabilities_are_fully_conformant(self, design_set):
        corpus = generate_corpus(SimConfig(seed=11, trace_count=100))
        report, _ = check_corpus(design_set, corpus, workers=1)
        assert report.total_traces == 100
        assert report.conformance_percentage == 1.0

    def test_microservice_request_is_non_immediate_descendant(self):
        trace = generate_trace(SimConfig(seed=11, trace_count=1), 0)
        ms_requests = [
            s
            for s in trace.spans.values()
            if s.name == "aspnet_core.request" and s.service_name == MICROSERVICE
        ]
        assert len(ms_requests) == 1
        parent = trace.parent_of(ms_requests[0])
        assert parent is not None
        assert parent.name != "aspnet_core.request"
        grandparent = trace.parent_of(parent)
        assert grandparent is not None
        assert grandparent.name == "aspnet_core.request"
        assert grandparent.service_name == GATEWAY


class TestForcedDeviations:
    def test_forced_direct_access(self, design_set):
        corpus = generate_corpus(SimConfig(seed=13, trace_count=20, p_direct=1.0))
        for trace in corpus:
            verdict = check_trace(design_set, trace)
            kinds_and_spans = [(v.kind, v.design_span_id) for v in verdict.violations]
            assert kinds_and_spans == [
                (ViolationKind.DISALLOWED_PRESENT, "D"),
                (ViolationKind.DISALLOWED_PRESENT, "E"),
            ]

    def test_forced_omission(self, design_set):
        corpus = generate_corpus(SimConfig(seed=13, trace_count=20, p_omit=1.0))
        for trace in corpus:
            verdict = check_trace(design_set, trace)
            assert [(v.kind, v.design_span_id) for v in verdict.violations] == [
                (ViolationKind.MISSING_REQUIRED, "C")
            ]

    def test_forced_slowness(self, design_set):
        corpus = generate_corpus(SimConfig(seed=13, trace_count=20, p_slow=1.0))
        for trace in corpus:
            verdict = check_trace(design_set, trace)
            assert [(v.kind, v.design_span_id) for v in verdict.violations] == [
                (ViolationKind.DURATION_EXCEEDED, "A")
            ]


class TestDeviationIndependence:
    def test_changing_p_slow_leaves_other_draws_alone(self):
        base = SimConfig(seed=21, trace_count=400, p_omit=0.2, p_slow=0.0, p_direct=0.2)
        slowed = SimConfig(seed=21, trace_count=400, p_omit=0.2, p_slow=0.9, p_direct=0.2)
        for index in range(400):
            omit_a, _, direct_a = deviation_flags(base, index)
            omit_b, _, direct_b = deviation_flags(slowed, index)
            assert (omit_a, direct_a) == (omit_b, direct_b)

    def test_omission_pattern_survives_p_slow_change(self, design_set):
        base = generate_corpus(SimConfig(seed=22, trace_count=150, p_omit=0.3))
        slowed = generate_corpus(SimConfig(seed=22, trace_count=150, p_omit=0.3, p_slow=0.9))

        def omitted_ids(corpus):
            return {
                t.trace_id
                for t in corpus
                if not any(
                    s.name == QUERY_SPAN_NAME and s.service_name == MICROSERVICE
                    for s in t.spans.values()
                )
            }

        assert omitted_ids(base) == omitted_ids(slowed)


class TestStatisticalComposition:
    def test_measured_conformance_tracks_analytic_expectation(self, design_set):
        config = SimConfig(
            seed=7, trace_count=10_000, p_omit=0.07, p_slow=0.06, p_direct=0.075
        )
        corpus = generate_corpus(config)
        report, _ = check_corpus(design_set, corpus, workers=1)
        expected = (1 - 0.07) * (1 - 0.06) * (1 - 0.075)
        sigma = math.sqrt(expected * (1 - expected) / config.trace_count)
        assert abs(report.conformance_percentage - expected) <= 3 * sigma


class TestWriteCorpus:
    def test_even_split(self, tmp_path, design_set):
        corpus = generate_corpus(SimConfig(seed=31, trace_count=100))
        assert write_corpus(corpus, tmp_path, traces_per_file=50) == 2
        assert sorted(p.name for p in tmp_path.glob("*.json")) == [
            "corpus-000000.json",
            "corpus-000001.json",
        ]
        reloaded, warnings = load_corpus_dir(tmp_path)
        assert warnings == []
        assert reloaded == sorted(corpus, key=lambda t: t.trace_id)

    def test_remainder_file(self, tmp_path):
        corpus = generate_corpus(SimConfig(seed=31, trace_count=101))
        assert write_corpus(corpus, tmp_path, traces_per_file=50) == 3

    def test_zero_traces(self, tmp_path):
        assert write_corpus([], tmp_path, traces_per_file=50) == 0
        assert list(tmp_path.glob("*.json")) == []

    def test_traces_per_file_must_be_positive(self, tmp_path):
        with pytest.raises(ValueError):
            write_corpus([], tmp_path, traces_per_file=0)
