"""Threshold sweep: the performance vs. speedup tradeoff curve.

Cascade time at an operating point is tier-1 time over all instances plus
tier-2 time over the escalated instances only. Speedup is relative to
running the second tier alone, so the escalate-all point sits slightly
below 1x (the cascade still pays tier-1 for every instance); reports
annotate it as the tier-2-equivalent point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import gate, metrics
from ._util import NeumaierSum as _NeumaierSum
from .costs import CostModel, TierCost, batched_time, optimal_batch_size
from .errors import ValidationError
from .gate import RoutingDecision
from .trace import MetricSpec, Trace

__all__ = [
    "CurvePoint",
    "total_time",
    "tier2_only_time",
    "sweep",
    "speedup_at",
    "speedup_report",
    "optimal_batch_size",
    "curve_to_csv",
    "write_curve_csv",
    "CURVE_CSV_HEADER",
]

CURVE_CSV_HEADER = "threshold,escalation_fraction,performance,total_time_s,speedup,throughput_per_s"

RANDOM_GRID = tuple(i / 20 for i in range(21))
DEFAULT_RANDOM_SEEDS = 5
ORACLE_MAX_POINTS = 200


@dataclass(frozen=True)
class CurvePoint:
    """One operating point along a policy family's tradeoff curve.

    For the threshold family `threshold` is the confidence threshold; for
    the random family it is the escalation probability; for the oracle
    family it is the escalation budget. `escalations` is the (seed-averaged)
    escalation count backing escalation_fraction.
    """

    threshold: float
    escalation_fraction: float
    performance: float
    total_time_s: float
    speedup: float
    throughput_per_s: float
    escalations: float


def _fully_measured(trace: Trace, tier: int) -> bool:
    attr = "tier1_cost" if tier == 1 else "tier2_cost"
    return all(getattr(rec, attr) is not None for rec in trace)


def _tier_time(
    trace: Trace,
    workload: Sequence[int],
    tier: int,
    cost: TierCost | None,
    batch_size: int,
) -> float:
    """Time for one tier over the given record indices.

    Measured per-record costs override the model when the trace is fully
    cost-annotated for the tier; otherwise the cost model is used.
    """
    if not workload:
        return 0.0
    if _fully_measured(trace, tier):
        attr = "tier1_cost" if tier == 1 else "tier2_cost"
        return math.fsum(getattr(trace.records[i], attr) for i in workload)
    if cost is not None:
        return batched_time(cost, len(workload), batch_size)
    raise ValidationError(
        f"no cost model for tier {tier} and per-record tier{tier}_cost is not present on every record"
    )


def total_time(
    decisions: Sequence[RoutingDecision],
    trace: Trace,
    cost: CostModel,
    batch_sizes: tuple[int, int] = (1, 1),
) -> float:
    """Cascade time: tier-1 over all instances plus tier-2 over escalations."""
    if len(decisions) != len(trace):
        raise ValidationError("decisions do not cover the trace")
    by_id = {d.id: d for d in decisions}
    escalated = [i for i, rec in enumerate(trace) if by_id[rec.id].escalated]
    t1 = _tier_time(trace, range(len(trace)), 1, cost.tier1, batch_sizes[0])
    t2 = _tier_time(trace, escalated, 2, cost.tier2, batch_sizes[1])
    return t1 + t2


def tier2_only_time(trace: Trace, cost: CostModel, batch_sizes: tuple[int, int] = (1, 1)) -> float:
    """Time for the second tier alone over every instance (speedup denominator's baseline)."""
    return _tier_time(trace, range(len(trace)), 2, cost.tier2, batch_sizes[1])


def _point(
    *,
    threshold: float,
    escalations: float,
    performance: float,
    time_s: float,
    baseline_s: float,
    n: int,
) -> CurvePoint:
    return CurvePoint(
        threshold=threshold,
        escalation_fraction=escalations / n,
        performance=performance,
        total_time_s=time_s,
        speedup=baseline_s / time_s,
        throughput_per_s=n / time_s,
        escalations=escalations,
    )


class _IncrementalPerformance:
    """Aggregate performance updated record-by-record as the escalated set grows.

    Confusion-based metrics use exact integer counts; mean_score uses a
    compensated float sum. The all-tier-1 and all-tier-2 extremes are
    computed by metrics.evaluate anyway (see sweep), so only interior points
    rely on the incremental state.
    """

    def __init__(self, trace: Trace, metric: MetricSpec):
        self.metric = metric
        self.n = len(trace)
        if metric.kind == "mean_score":
            self._sum = _NeumaierSum(math.fsum(rec.quality(1) for rec in trace))
            self._deltas = [rec.quality(2) - rec.quality(1) for rec in trace]
        elif metric.kind == "accuracy":
            self._correct = sum(1 for r in trace if r.tier1_pred == r.gold_label)
            self._deltas = [
                (1 if r.tier2_pred == r.gold_label else 0) - (1 if r.tier1_pred == r.gold_label else 0)
                for r in trace
            ]
        else:
            positive = metrics.positive_label_for(trace, metric)
            c1 = [metrics.confusion_contribution(r.tier1_pred, r.gold_label, positive) for r in trace]
            c2 = [metrics.confusion_contribution(r.tier2_pred, r.gold_label, positive) for r in trace]
            self._counts = [sum(c[k] for c in c1) for k in range(4)]
            self._deltas = [tuple(b - a for a, b in zip(x, y)) for x, y in zip(c1, c2)]

    def escalate(self, index: int) -> None:
        if self.metric.kind == "mean_score":
            self._sum.add(self._deltas[index])
        elif self.metric.kind == "accuracy":
            self._correct += self._deltas[index]
        else:
            d = self._deltas[index]
            for k in range(4):
                self._counts[k] += d[k]

    def value(self) -> float:
        if self.metric.kind == "mean_score":
            return self._sum.value / self.n
        if self.metric.kind == "accuracy":
            return self._correct / self.n
        raw = metrics.f1_raw if self.metric.kind == "f1" else metrics.mcc_raw
        tp, fp, tn, fn = self._counts
        return raw(tp, fp, tn, fn)


class _IncrementalTier2Time:
    """Tier-2 time as the escalated set grows along the sweep."""

    def __init__(self, trace: Trace, cost: CostModel, batch_size: int):
        self.trace = trace
        self.cost = cost.tier2
        self.batch_size = batch_size
        self.measured = _fully_measured(trace, 2)
        if not self.measured and self.cost is None:
            raise ValidationError(
                "no cost model for tier 2 and per-record tier2_cost is not present on every record"
            )
        self._sum = _NeumaierSum()
        self._count = 0

    def escalate(self, index: int) -> None:
        self._count += 1
        if self.measured:
            self._sum.add(self.trace.records[index].tier2_cost)

    def value(self) -> float:
        if self.measured:
            return self._sum.value
        return batched_time(self.cost, self._count, self.batch_size)


def _sweep_threshold(
    trace: Trace, metric: MetricSpec, cost: CostModel, batch_sizes: tuple[int, int]
) -> list[CurvePoint]:
    n = len(trace)
    t1_time = _tier_time(trace, range(n), 1, cost.tier1, batch_sizes[0])
    baseline = tier2_only_time(trace, cost, batch_sizes)

    order = sorted(range(n), key=lambda i: trace.records[i].tier1_confidence)
    confidences = [trace.records[i].tier1_confidence for i in order]

    perf = _IncrementalPerformance(trace, metric)
    t2 = _IncrementalTier2Time(trace, cost, batch_sizes[1])

    # endpoints are evaluated directly so they are bitwise-identical to the
    # tier-1-only / tier-2-only evaluations
    perf_tier1 = metrics.evaluate(gate.route_threshold(trace, 0.0), trace, metric)
    perf_tier2 = metrics.evaluate(gate.route_all(trace), trace, metric)

    candidates = sorted(set(confidences) | {0.0})
    points = [
        _point(threshold=0.0, escalations=0, performance=perf_tier1, time_s=t1_time, baseline_s=baseline, n=n)
    ]
    pos = 0  # records with confidence < current candidate, i.e. escalated
    for t in candidates:
        if t == 0.0:
            continue  # already emitted: nothing sits below threshold 0
        while pos < n and confidences[pos] < t:
            perf.escalate(order[pos])
            t2.escalate(order[pos])
            pos += 1
        points.append(
            _point(
                threshold=t,
                escalations=pos,
                performance=perf.value(),
                time_s=t1_time + t2.value(),
                baseline_s=baseline,
                n=n,
            )
        )
    # synthetic escalate-all point, just above the maximum observed confidence
    while pos < n:
        t2.escalate(order[pos])
        pos += 1
    points.append(
        _point(
            threshold=math.nextafter(confidences[-1], math.inf),
            escalations=n,
            performance=perf_tier2,
            time_s=t1_time + t2.value(),
            baseline_s=baseline,
            n=n,
        )
    )
    return points


def _sweep_random(
    trace: Trace,
    metric: MetricSpec,
    cost: CostModel,
    batch_sizes: tuple[int, int],
    seeds: Sequence[int],
) -> list[CurvePoint]:
    n = len(trace)
    baseline = tier2_only_time(trace, cost, batch_sizes)
    points = []
    for p in RANDOM_GRID:
        perfs, times, counts = [], [], []
        for seed in seeds:
            decisions = gate.route_random(trace, p, seed)
            perfs.append(metrics.evaluate(decisions, trace, metric))
            times.append(total_time(decisions, trace, cost, batch_sizes))
            counts.append(sum(1 for d in decisions if d.escalated))
        r = len(seeds)
        points.append(
            _point(
                threshold=p,
                escalations=math.fsum(counts) / r,
                performance=math.fsum(perfs) / r,
                time_s=math.fsum(times) / r,
                baseline_s=baseline,
                n=n,
            )
        )
    return points


def _oracle_budgets(n: int, max_points: int) -> list[int]:
    if n + 1 <= max_points:
        return list(range(n + 1))
    return sorted({round(i * n / (max_points - 1)) for i in range(max_points)})


def _sweep_oracle(
    trace: Trace,
    metric: MetricSpec,
    cost: CostModel,
    batch_sizes: tuple[int, int],
    max_points: int,
) -> list[CurvePoint]:
    n = len(trace)
    baseline = tier2_only_time(trace, cost, batch_sizes)
    points = []
    for k in _oracle_budgets(n, max_points):
        decisions = gate.route_oracle(trace, k, metric)
        m = sum(1 for d in decisions if d.escalated)
        points.append(
            _point(
                threshold=float(k),
                escalations=m,
                performance=metrics.evaluate(decisions, trace, metric),
                time_s=total_time(decisions, trace, cost, batch_sizes),
                baseline_s=baseline,
                n=n,
            )
        )
    return points


def sweep(
    trace: Trace,
    metric: MetricSpec,
    cost: CostModel,
    family: str = "threshold",
    *,
    batch_sizes: tuple[int, int] = (1, 1),
    seeds: Sequence[int] | None = None,
    base_seed: int = 0,
    num_seeds: int = DEFAULT_RANDOM_SEEDS,
    oracle_max_points: int = ORACLE_MAX_POINTS,
) -> list[CurvePoint]:
    """Operating points of one policy family, sorted by speedup (ascending).

    threshold: one point per distinct observed confidence, plus threshold 0
    and a synthetic escalate-all point. random: escalation probabilities on
    a 0.05 grid, performance and time averaged over the seeds. oracle:
    budgets 0..n, subsampled to at most oracle_max_points.
    """
    trace.validate_metric(metric)
    if family == "threshold":
        points = _sweep_threshold(trace, metric, cost, batch_sizes)
    elif family == "random":
        if seeds is None:
            seeds = [base_seed + j for j in range(num_seeds)]
        if not seeds:
            raise ValidationError("random sweep needs at least one seed")
        points = _sweep_random(trace, metric, cost, batch_sizes, seeds)
    elif family == "oracle":
        points = _sweep_oracle(trace, metric, cost, batch_sizes, oracle_max_points)
    else:
        raise ValidationError(f"unknown policy family {family!r}")
    return sorted(points, key=lambda pt: pt.speedup)


def speedup_at(
    trace: Trace,
    metric: MetricSpec,
    cost: CostModel,
    quality_fraction: float,
    *,
    batch_sizes: tuple[int, int] = (1, 1),
) -> tuple[float, CurvePoint] | None:
    """Best threshold-curve speedup with performance >= q x tier-2-only performance.

    Ties break toward the smaller threshold. None means not achievable: even
    the escalate-all point misses the bar.
    """
    if not 0.0 < quality_fraction <= 1.0:
        raise ValidationError(f"quality fraction {quality_fraction} outside (0, 1]")
    points = sweep(trace, metric, cost, "threshold", batch_sizes=batch_sizes)
    tier2_perf = metrics.evaluate(gate.route_all(trace), trace, metric)
    bar = quality_fraction * tier2_perf
    qualifying = [pt for pt in points if pt.performance >= bar]
    if not qualifying:
        return None
    best = sorted(qualifying, key=lambda pt: (-pt.speedup, pt.threshold))[0]
    return best.threshold, best


def speedup_report(
    trace: Trace,
    metric: MetricSpec,
    cost: CostModel,
    quality_fractions: Sequence[float],
    *,
    batch_sizes: tuple[int, int] = (1, 1),
) -> dict:
    """Speedup@q summary mirroring the tabular column semantics of the curve reports."""
    tier2_perf = metrics.evaluate(gate.route_all(trace), trace, metric)
    tier1_perf = metrics.evaluate(gate.route_threshold(trace, 0.0), trace, metric)
    entries = []
    for q in quality_fractions:
        found = speedup_at(trace, metric, cost, q, batch_sizes=batch_sizes)
        if found is None:
            entries.append({"quality_fraction": q, "achievable": False})
            continue
        threshold, pt = found
        entries.append(
            {
                "quality_fraction": q,
                "achievable": True,
                "threshold": threshold,
                "speedup": round(pt.speedup, 4),
                "performance": round(pt.performance, 4),
                "escalation_fraction": round(pt.escalation_fraction, 4),
                "total_time_s": pt.total_time_s,
                "throughput_per_s": round(pt.throughput_per_s, 4),
            }
        )
    return {
        "metric": metric.spec_id(),
        "records": len(trace),
        "batch_sizes": list(batch_sizes),
        "tier1_performance": round(tier1_perf, 4),
        "tier2_performance": round(tier2_perf, 4),
        "escalate_all_note": "the leftmost sweep point escalates everything;"
        " it is the tier-2-equivalent point and its speedup is slightly below 1",
        "targets": entries,
    }


def _fmt(x: float) -> str:
    return format(x, ".6g")


def curve_to_csv(points: Sequence[CurvePoint]) -> str:
    lines = [CURVE_CSV_HEADER]
    for pt in points:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    pt.threshold,
                    pt.escalation_fraction,
                    pt.performance,
                    pt.total_time_s,
                    pt.speedup,
                    pt.throughput_per_s,
                )
            )
        )
    return "\n".join(lines) + "\n"


def write_curve_csv(points: Sequence[CurvePoint], path: str | Path) -> None:
    Path(path).write_text(curve_to_csv(points), encoding="utf-8")
