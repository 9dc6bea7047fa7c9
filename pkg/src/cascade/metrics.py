"""Aggregate performance metrics over routed decision lists.

All metrics are permutation-invariant over decisions and match the decisions
to trace records by id. MCC and binary F1 use the 0-on-zero-denominator
convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from .errors import ValidationError
from .trace import MetricSpec, Trace

if TYPE_CHECKING:  # runtime import would be circular (gate uses these metrics)
    from .gate import RoutingDecision


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _check_coverage(decisions: Sequence[RoutingDecision], trace: Trace) -> None:
    if len(decisions) != len(trace):
        raise ValidationError(
            f"decision list covers {len(decisions)} records, trace has {len(trace)}"
        )
    ids = {d.id for d in decisions}
    if len(ids) != len(decisions) or ids != set(trace.by_id()):
        raise ValidationError("decision ids do not cover exactly the trace ids")


def confusion(
    decisions: Sequence[RoutingDecision], trace: Trace, positive_label: str
) -> ConfusionCounts:
    """Binary confusion counts of final predictions against gold labels.

    The binary label set is the observed labels (gold and final predictions)
    plus the declared positive label; degenerate traces that only ever show
    one of the two labels still count cleanly.
    """
    _check_coverage(decisions, trace)
    observed = trace.label_set() | {d.final_pred for d in decisions}
    if len(observed | {positive_label}) > 2:
        if positive_label not in observed:
            raise ValidationError(
                f"positive_label {positive_label!r} absent from label set {sorted(observed)}"
            )
        raise ValidationError(f"label set {sorted(observed)} is not binary")
    by_id = trace.by_id()
    tp = fp = tn = fn = 0
    for d in decisions:
        gold = by_id[d.id].gold_label
        if gold is None:
            raise ValidationError(f"record {d.id!r} has no gold label")
        pred_pos = d.final_pred == positive_label
        gold_pos = gold == positive_label
        if pred_pos and gold_pos:
            tp += 1
        elif pred_pos:
            fp += 1
        elif gold_pos:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def f1_raw(tp: int, fp: int, tn: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0
    return 2 * tp / denom


def mcc_raw(tp: int, fp: int, tn: int, fn: int) -> float:
    # zero-denominator convention: any zero factor under the root gives 0
    denom_sq = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom_sq == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom_sq)


def f1_from_counts(c: ConfusionCounts) -> float:
    return f1_raw(c.tp, c.fp, c.tn, c.fn)


def mcc_from_counts(c: ConfusionCounts) -> float:
    return mcc_raw(c.tp, c.fp, c.tn, c.fn)


def positive_label_for(trace: Trace, metric: MetricSpec) -> str:
    """The positive label the metric counts against (mcc picks arbitrarily;
    its value is invariant under the choice)."""
    if metric.positive_label is not None:
        return metric.positive_label
    return sorted(trace.label_set())[-1]


def confusion_contribution(
    pred: str, gold: str | None, positive_label: str
) -> tuple[int, int, int, int]:
    """One record's (tp, fp, tn, fn) contribution for a given prediction."""
    if gold is None:
        raise ValidationError("confusion counting needs a gold label")
    pred_pos = pred == positive_label
    gold_pos = gold == positive_label
    if pred_pos and gold_pos:
        return (1, 0, 0, 0)
    if pred_pos:
        return (0, 1, 0, 0)
    if gold_pos:
        return (0, 0, 0, 1)
    return (0, 0, 1, 0)


def evaluate(
    decisions: Sequence[RoutingDecision], trace: Trace, metric: MetricSpec
) -> float:
    """Aggregate performance of the final predictions under the metric.

    accuracy = correct/n; f1 = 2tp/(2tp+fp+fn); mcc per Matthews correlation;
    mean_score = mean of per-instance final scores (exact fsum, so the value
    is independent of decision order).
    """
    _check_coverage(decisions, trace)
    trace.validate_metric(metric)
    n = len(trace)
    if metric.kind == "mean_score":
        return math.fsum(d.final_score for d in decisions) / n
    by_id = trace.by_id()
    if metric.kind == "accuracy":
        correct = sum(1 for d in decisions if d.final_pred == by_id[d.id].gold_label)
        return correct / n
    if metric.kind == "f1":
        return f1_from_counts(confusion(decisions, trace, metric.positive_label))
    return mcc_from_counts(confusion(decisions, trace, positive_label_for(trace, metric)))
