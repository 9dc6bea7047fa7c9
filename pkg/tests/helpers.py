"""Shared builders for synthetic traces used across the test suite."""

from __future__ import annotations

import random

from cascade.trace import MetricSpec, Trace, TraceMeta, TraceRecord

LABELS = ("neg", "pos")


def rec(
    id: str,
    gold: str | None = None,
    p1: str = "neg",
    conf: float = 0.5,
    p2: str = "neg",
    s1: float | None = None,
    s2: float | None = None,
    c1: float | None = None,
    c2: float | None = None,
) -> TraceRecord:
    return TraceRecord(
        id=id,
        gold_label=gold,
        tier1_pred=p1,
        tier1_confidence=conf,
        tier2_pred=p2,
        tier1_score=s1,
        tier2_score=s2,
        tier1_cost=c1,
        tier2_cost=c2,
    )


def random_classification_trace(
    rng: random.Random,
    n: int,
    *,
    tier1_acc: float = 0.7,
    tier2_acc: float = 0.9,
    ensure_both_labels: bool = False,
    with_costs: bool = False,
) -> Trace:
    """Random binary trace; confidences are independent of correctness."""
    records = []
    for i in range(n):
        if ensure_both_labels and i < 2:
            gold = LABELS[i]
        else:
            gold = rng.choice(LABELS)
        other = LABELS[0] if gold == LABELS[1] else LABELS[1]
        records.append(
            rec(
                id=f"r{i:04d}",
                gold=gold,
                p1=gold if rng.random() < tier1_acc else other,
                conf=rng.random(),
                p2=gold if rng.random() < tier2_acc else other,
                c1=rng.uniform(0.001, 0.01) if with_costs else None,
                c2=rng.uniform(0.01, 0.1) if with_costs else None,
            )
        )
    return Trace(records=tuple(records), meta=TraceMeta(metric="accuracy"))


def random_score_trace(rng: random.Random, n: int) -> Trace:
    """Trace with per-instance quality scores (mean_score metric), no gold labels."""
    records = []
    for i in range(n):
        records.append(
            rec(
                id=f"r{i:04d}",
                p1="a",
                conf=rng.random(),
                p2="b",
                s1=rng.random(),
                s2=rng.random(),
            )
        )
    return Trace(records=tuple(records), meta=TraceMeta(metric="mean_score"))


ACCURACY = MetricSpec("accuracy")
MCC = MetricSpec("mcc")
MEAN_SCORE = MetricSpec("mean_score")


def f1(pos: str = "pos") -> MetricSpec:
    return MetricSpec("f1", pos)
