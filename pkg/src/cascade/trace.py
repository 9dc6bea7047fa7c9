"""Trace data model and JSONL file format.

A trace is the offline record of running both cascade tiers over an
evaluation set: per instance, the tier-1 prediction and confidence, the
tier-2 prediction, the gold label and/or per-instance quality scores, and
optionally measured per-instance inference costs. Every evaluation
operation in this toolkit is driven by traces, so no ML runtime is needed.

File format: UTF-8 JSON Lines, one record object per line with exactly the
TraceRecord field names (absent optional fields are omitted, never null).
An optional leading header line carries file-level metadata under the
reserved key ``__meta__``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import TraceFormatError, ValidationError

META_KEY = "__meta__"

_REQUIRED_FIELDS = ("id", "tier1_pred", "tier1_confidence", "tier2_pred")
_OPTIONAL_FIELDS = ("gold_label", "tier1_score", "tier2_score", "tier1_cost", "tier2_cost")
_ALL_FIELDS = set(_REQUIRED_FIELDS) | set(_OPTIONAL_FIELDS)


@dataclass(frozen=True)
class MetricSpec:
    """How aggregate performance is computed for a trace.

    kind is one of ``accuracy``, ``f1`` (binary, needs positive_label),
    ``mcc``, or ``mean_score`` (mean of per-instance quality scores, e.g.
    token-level F1 for reading comprehension).
    """

    kind: str
    positive_label: str | None = None

    KINDS = ("accuracy", "f1", "mcc", "mean_score")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown metric kind {self.kind!r}; expected one of {self.KINDS}")
        if self.kind == "f1" and not self.positive_label:
            raise ValidationError("f1 metric requires a positive_label")
        if self.kind != "f1" and self.positive_label is not None:
            raise ValidationError(f"positive_label only applies to f1, not {self.kind!r}")

    @property
    def needs_gold(self) -> bool:
        return self.kind in ("accuracy", "f1", "mcc")

    @property
    def needs_scores(self) -> bool:
        return self.kind == "mean_score"

    @property
    def separable(self) -> bool:
        """True when the metric is a per-instance sum (accuracy, mean_score)."""
        return self.kind in ("accuracy", "mean_score")

    def spec_id(self) -> str:
        if self.kind == "f1":
            return f"f1:{self.positive_label}"
        return self.kind

    @classmethod
    def parse(cls, spec_id: str) -> "MetricSpec":
        kind, _, pos = spec_id.partition(":")
        if kind == "f1":
            if not pos:
                raise ValidationError("f1 metric id must name the positive label, e.g. 'f1:pos'")
            return cls("f1", pos)
        if pos:
            raise ValidationError(f"metric {kind!r} takes no positive label")
        return cls(kind)


@dataclass(frozen=True)
class TraceRecord:
    """One evaluation instance as seen by both tiers."""

    id: str
    tier1_pred: str
    tier1_confidence: float
    tier2_pred: str
    gold_label: str | None = None
    tier1_score: float | None = None
    tier2_score: float | None = None
    tier1_cost: float | None = None
    tier2_cost: float | None = None

    def validate(self) -> None:
        if not self.id:
            raise ValidationError("record has an empty id")
        if not 0.0 <= self.tier1_confidence <= 1.0:
            raise ValidationError(
                f"record {self.id!r}: tier1_confidence {self.tier1_confidence} outside [0, 1]"
            )
        for name in ("tier1_score", "tier2_score"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValidationError(f"record {self.id!r}: {name} {value} outside [0, 1]")
        for name in ("tier1_cost", "tier2_cost"):
            value = getattr(self, name)
            if value is not None and (not math.isfinite(value) or value < 0.0):
                raise ValidationError(f"record {self.id!r}: {name} {value} is not a nonnegative time")
        if self.gold_label is None and (self.tier1_score is None or self.tier2_score is None):
            raise ValidationError(
                f"record {self.id!r}: gold_label may be omitted only when both "
                "tier1_score and tier2_score are present"
            )

    def quality(self, tier: int) -> float:
        """Per-instance quality of the given tier's prediction.

        Stored score when present, else 0/1 correctness against the gold label.
        """
        score = self.tier1_score if tier == 1 else self.tier2_score
        if score is not None:
            return score
        pred = self.tier1_pred if tier == 1 else self.tier2_pred
        return 1.0 if pred == self.gold_label else 0.0

    def to_json_dict(self) -> dict:
        out: dict = {
            "id": self.id,
            "tier1_pred": self.tier1_pred,
            "tier1_confidence": self.tier1_confidence,
            "tier2_pred": self.tier2_pred,
        }
        for name in _OPTIONAL_FIELDS:
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out


@dataclass(frozen=True)
class TraceMeta:
    dataset: str | None = None
    metric: str | None = None
    tier1_model: str | None = None
    tier2_model: str | None = None

    def to_json_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass(frozen=True)
class Trace:
    """An ordered, immutable sequence of trace records plus file metadata.

    Order is preserved exactly as loaded; it defines the stream for batch
    simulation. Immutability makes traces safe to share across threads and
    hashable, which the oracle result cache relies on.
    """

    records: tuple[TraceRecord, ...]
    meta: TraceMeta = TraceMeta()

    def __post_init__(self):
        if not self.records:
            raise ValidationError("trace has no records")
        seen: set[str] = set()
        for rec in self.records:
            rec.validate()
            if rec.id in seen:
                raise ValidationError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_id(self) -> dict[str, TraceRecord]:
        return {rec.id: rec for rec in self.records}

    def label_set(self) -> set[str]:
        return {rec.gold_label for rec in self.records if rec.gold_label is not None}

    def validate_metric(self, metric: MetricSpec) -> None:
        """Check that this trace carries the fields the metric needs."""
        if metric.needs_gold:
            for rec in self.records:
                if rec.gold_label is None:
                    raise ValidationError(
                        f"metric {metric.spec_id()!r} needs gold labels; record {rec.id!r} has none"
                    )
        if metric.needs_scores:
            for rec in self.records:
                if rec.tier1_score is None or rec.tier2_score is None:
                    raise ValidationError(
                        f"metric {metric.spec_id()!r} needs per-instance scores; "
                        f"record {rec.id!r} is missing one"
                    )
        if metric.kind in ("f1", "mcc"):
            labels = self.label_set()
            if metric.kind == "f1" and len(labels) != 2:
                raise ValidationError(
                    f"f1 needs exactly two distinct gold labels, trace has {sorted(labels)}"
                )
            if metric.kind == "mcc" and len(labels) > 2:
                raise ValidationError(
                    f"mcc needs a binary label set, trace has {sorted(labels)}"
                )
            if metric.kind == "f1" and metric.positive_label not in labels:
                raise ValidationError(
                    f"positive_label {metric.positive_label!r} does not occur in the "
                    f"gold label set {sorted(labels)}"
                )


def _record_from_obj(obj: dict, line_no: int) -> TraceRecord:
    if not isinstance(obj, dict):
        raise TraceFormatError(line_no, "record is not an object")
    unknown = set(obj) - _ALL_FIELDS
    if unknown:
        raise TraceFormatError(line_no, f"unknown field(s) {sorted(unknown)}")
    missing = [f for f in _REQUIRED_FIELDS if f not in obj]
    if missing:
        raise TraceFormatError(line_no, f"missing required field(s) {missing}")
    for name in ("id", "tier1_pred", "tier2_pred", "gold_label"):
        if name in obj and not isinstance(obj[name], str):
            raise TraceFormatError(line_no, f"field {name!r} must be a string")
    for name in ("tier1_confidence", "tier1_score", "tier2_score", "tier1_cost", "tier2_cost"):
        if name in obj and not isinstance(obj[name], (int, float)):
            raise TraceFormatError(line_no, f"field {name!r} must be a number")
        if name in obj and isinstance(obj[name], bool):
            raise TraceFormatError(line_no, f"field {name!r} must be a number")
    return TraceRecord(
        id=obj["id"],
        tier1_pred=obj["tier1_pred"],
        tier1_confidence=float(obj["tier1_confidence"]),
        tier2_pred=obj["tier2_pred"],
        gold_label=obj.get("gold_label"),
        tier1_score=None if obj.get("tier1_score") is None else float(obj["tier1_score"]),
        tier2_score=None if obj.get("tier2_score") is None else float(obj["tier2_score"]),
        tier1_cost=None if obj.get("tier1_cost") is None else float(obj["tier1_cost"]),
        tier2_cost=None if obj.get("tier2_cost") is None else float(obj["tier2_cost"]),
    )


def load_trace(path: str | Path, metric: MetricSpec | None = None) -> Trace:
    """Load and validate a trace file.

    When ``metric`` is None, the header's metric id is used for metric
    validation if present; otherwise only structural invariants are checked.
    Raises TraceFormatError for malformed lines (with the line number) and
    ValidationError for invariant violations (with the record id).
    """
    path = Path(path)
    records: list[TraceRecord] = []
    meta = TraceMeta()
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceFormatError(line_no, f"invalid JSON ({exc.msg})") from exc
            if isinstance(obj, dict) and META_KEY in obj:
                if line_no != 1 or len(obj) != 1:
                    raise TraceFormatError(line_no, f"{META_KEY} must be alone on the first line")
                header = obj[META_KEY]
                if not isinstance(header, dict):
                    raise TraceFormatError(line_no, f"{META_KEY} value must be an object")
                meta = TraceMeta(
                    dataset=header.get("dataset"),
                    metric=header.get("metric"),
                    tier1_model=header.get("tier1_model"),
                    tier2_model=header.get("tier2_model"),
                )
                continue
            records.append(_record_from_obj(obj, line_no))
    trace = Trace(records=tuple(records), meta=meta)
    effective = metric
    if effective is None and meta.metric:
        effective = MetricSpec.parse(meta.metric)
    if effective is not None:
        trace.validate_metric(effective)
    return trace


def write_trace(trace: Trace, path: str | Path) -> None:
    """Write a trace in the JSONL format; load_trace(write_trace(t)) == t."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        header = trace.meta.to_json_dict()
        if header:
            fh.write(json.dumps({META_KEY: header}, sort_keys=True) + "\n")
        for rec in trace.records:
            fh.write(json.dumps(rec.to_json_dict()) + "\n")


def make_trace(records: Iterable[TraceRecord], meta: TraceMeta | None = None) -> Trace:
    return Trace(records=tuple(records), meta=meta or TraceMeta())
