from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascade.errors import TraceFormatError, ValidationError
from cascade.trace import (
    MetricSpec,
    Trace,
    TraceMeta,
    TraceRecord,
    load_trace,
    make_trace,
    write_trace,
)
from helpers import ACCURACY, MCC, rec


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def record_line(**kw):
    return json.dumps(kw)


def test_load_three_valid_lines_in_order(tmp_path):
    p = tmp_path / "t.jsonl"
    write_lines(
        p,
        [
            record_line(id="b", gold_label="x", tier1_pred="x", tier1_confidence=0.9, tier2_pred="x"),
            record_line(id="a", gold_label="y", tier1_pred="x", tier1_confidence=0.2, tier2_pred="y"),
            record_line(id="c", gold_label="x", tier1_pred="x", tier1_confidence=0.7, tier2_pred="y"),
        ],
    )
    trace = load_trace(p, ACCURACY)
    assert [r.id for r in trace] == ["b", "a", "c"]


def test_confidence_out_of_range_names_the_record(tmp_path):
    p = tmp_path / "t.jsonl"
    write_lines(
        p,
        [record_line(id="bad1", gold_label="x", tier1_pred="x", tier1_confidence=1.3, tier2_pred="x")],
    )
    with pytest.raises(ValidationError, match="bad1"):
        load_trace(p)


def test_missing_gold_under_mcc_names_first_offender(tmp_path):
    p = tmp_path / "t.jsonl"
    write_lines(
        p,
        [
            record_line(id="ok", gold_label="x", tier1_pred="x", tier1_confidence=0.5, tier2_pred="x"),
            record_line(id="nogold", tier1_pred="x", tier1_confidence=0.5, tier2_pred="x",
                        tier1_score=1.0, tier2_score=1.0),
        ],
    )
    with pytest.raises(ValidationError, match="nogold"):
        load_trace(p, MCC)


def test_duplicate_id_is_a_load_error(tmp_path):
    p = tmp_path / "t.jsonl"
    line = record_line(id="dup", gold_label="x", tier1_pred="x", tier1_confidence=0.5, tier2_pred="x")
    write_lines(p, [line, line])
    with pytest.raises(ValidationError, match="dup"):
        load_trace(p)


def test_malformed_line_reports_line_number(tmp_path):
    p = tmp_path / "t.jsonl"
    write_lines(
        p,
        [
            record_line(id="a", gold_label="x", tier1_pred="x", tier1_confidence=0.5, tier2_pred="x"),
            "{not json",
        ],
    )
    with pytest.raises(TraceFormatError, match="line 2"):
        load_trace(p)


def test_unknown_field_rejected_with_line_number(tmp_path):
    p = tmp_path / "t.jsonl"
    write_lines(
        p,
        [record_line(id="a", gold_label="x", tier1_pred="x", tier1_confidence=0.5,
                     tier2_pred="x", extra=1)],
    )
    with pytest.raises(TraceFormatError, match="line 1"):
        load_trace(p)


def test_missing_required_field(tmp_path):
    p = tmp_path / "t.jsonl"
    write_lines(p, [record_line(id="a", gold_label="x", tier1_confidence=0.5, tier2_pred="x")])
    with pytest.raises(TraceFormatError, match="tier1_pred"):
        load_trace(p)


def test_record_without_gold_needs_both_scores():
    with pytest.raises(ValidationError, match="gold_label"):
        make_trace([rec("a", gold=None, s1=0.5, s2=None)])


def test_empty_trace_rejected(tmp_path):
    p = tmp_path / "t.jsonl"
    p.write_text("", encoding="utf-8")
    with pytest.raises(ValidationError, match="no records"):
        load_trace(p)


def test_header_metadata_round_trip(tmp_path):
    meta = TraceMeta(dataset="demo", metric="accuracy", tier1_model="small", tier2_model="big")
    trace = make_trace([rec("a", gold="x", p1="x", p2="x")], meta)
    p = tmp_path / "t.jsonl"
    write_trace(trace, p)
    first = json.loads(p.read_text().splitlines()[0])
    assert "__meta__" in first
    loaded = load_trace(p)
    assert loaded.meta == meta
    assert loaded == trace


def test_header_metric_is_validated_when_no_explicit_metric(tmp_path):
    p = tmp_path / "t.jsonl"
    write_lines(
        p,
        [
            json.dumps({"__meta__": {"metric": "mcc"}}),
            record_line(id="nogold", tier1_pred="x", tier1_confidence=0.5, tier2_pred="x",
                        tier1_score=1.0, tier2_score=1.0),
        ],
    )
    with pytest.raises(ValidationError, match="nogold"):
        load_trace(p)


def test_single_record_trace_writes_one_line(tmp_path):
    trace = make_trace([rec("only", gold="x", p1="x", p2="x")])
    p = tmp_path / "t.jsonl"
    write_trace(trace, p)
    lines = [ln for ln in p.read_text().splitlines() if ln]
    assert len(lines) == 1  # empty metadata: no header line


def test_optional_fields_omitted_not_null(tmp_path):
    trace = make_trace([rec("a", gold="x", p1="x", p2="x")])
    p = tmp_path / "t.jsonl"
    write_trace(trace, p)
    obj = json.loads(p.read_text().splitlines()[0])
    assert "tier1_score" not in obj and "tier1_cost" not in obj


def test_write_to_unwritable_path_raises_oserror(tmp_path):
    trace = make_trace([rec("a", gold="x", p1="x", p2="x")])
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        write_trace(trace, blocker / "child.jsonl")


unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
label = st.sampled_from(["neg", "pos", "maybe"])


@st.composite
def trace_records(draw, index: int):
    has_gold = draw(st.booleans())
    has_scores = draw(st.booleans()) or not has_gold
    return TraceRecord(
        id=f"r{index}",
        gold_label=draw(label) if has_gold else None,
        tier1_pred=draw(label),
        tier1_confidence=draw(unit),
        tier2_pred=draw(label),
        tier1_score=draw(unit) if has_scores else None,
        tier2_score=draw(unit) if has_scores else None,
        tier1_cost=draw(st.one_of(st.none(), unit)),
        tier2_cost=draw(st.one_of(st.none(), unit)),
    )


@st.composite
def traces(draw):
    n = draw(st.integers(min_value=1, max_value=30))
    records = tuple(draw(trace_records(i)) for i in range(n))
    metric_choices = [None]
    if all(r.gold_label is not None for r in records):
        metric_choices.append("accuracy")
    if all(r.tier1_score is not None and r.tier2_score is not None for r in records):
        metric_choices.append("mean_score")
    meta = TraceMeta(
        dataset=draw(st.one_of(st.none(), st.just("demo"))),
        metric=draw(st.sampled_from(metric_choices)),
    )
    return Trace(records=records, meta=meta)


@settings(max_examples=60, deadline=None)
@given(traces())
def test_round_trip_is_field_identical(tmp_path_factory, trace):
    p = tmp_path_factory.mktemp("rt") / "t.jsonl"
    write_trace(trace, p)
    assert load_trace(p) == trace


def test_metric_spec_ids():
    assert MetricSpec.parse("accuracy") == MetricSpec("accuracy")
    assert MetricSpec.parse("f1:pos") == MetricSpec("f1", "pos")
    assert MetricSpec.parse("mcc").spec_id() == "mcc"
    assert MetricSpec.parse("f1:yes").spec_id() == "f1:yes"
    with pytest.raises(ValidationError):
        MetricSpec.parse("f1")
    with pytest.raises(ValidationError):
        MetricSpec.parse("accuracy:pos")
    with pytest.raises(ValidationError):
        MetricSpec.parse("nope")
