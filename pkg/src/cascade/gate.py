"""Per-instance routing policies: which records get the second tier.

Three policies: the confidence-threshold gate (escalate when the tier-1
confidence is strictly below the threshold), a random gate (baseline), and
an oracle gate (upper bound, picks the escalation set that maximizes
aggregate performance within a budget).
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from functools import lru_cache

from . import metrics as _metrics
from .errors import ValidationError
from .trace import MetricSpec, Trace, TraceRecord

logger = logging.getLogger(__name__)

# Exact oracle subset search is feasible up to this many records; beyond it
# the non-separable metrics fall back to greedy-by-accuracy-gain.
EXACT_ORACLE_MAX_N = 20


@dataclass(frozen=True)
class ThresholdPolicy:
    t: float


@dataclass(frozen=True)
class RandomPolicy:
    p: float
    seed: int


@dataclass(frozen=True)
class OraclePolicy:
    budget_k: int


RoutingPolicy = ThresholdPolicy | RandomPolicy | OraclePolicy


@dataclass(frozen=True)
class RoutingDecision:
    """Final outcome for one record: which tier answered and with what quality."""

    id: str
    escalated: bool
    final_pred: str
    final_score: float


def _decide(rec: TraceRecord, escalated: bool) -> RoutingDecision:
    tier = 2 if escalated else 1
    return RoutingDecision(
        id=rec.id,
        escalated=escalated,
        final_pred=rec.tier2_pred if escalated else rec.tier1_pred,
        final_score=rec.quality(tier),
    )


def route_threshold(trace: Trace, t: float) -> list[RoutingDecision]:
    """Escalate exactly the records with tier1_confidence strictly below t.

    t = 0 therefore means "first tier only"; a confidence equal to the
    threshold is NOT escalated.
    """
    if not 0.0 <= t <= 1.0:
        raise ValidationError(f"threshold {t} outside [0, 1]")
    return [_decide(rec, rec.tier1_confidence < t) for rec in trace]


def route_all(trace: Trace) -> list[RoutingDecision]:
    """Escalate every record (the synthetic tier-2-equivalent operating point)."""
    return [_decide(rec, True) for rec in trace]


def _uniform(seed: int, index: int) -> float:
    # Counter-based draw keyed on (seed, record index): decisions do not
    # depend on iteration order or on how many draws came before.
    digest = hashlib.sha256(f"{seed}:{index}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def route_random(trace: Trace, p: float, seed: int) -> list[RoutingDecision]:
    """Escalate each record independently with probability p, deterministically in seed."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"escalation probability {p} outside [0, 1]")
    if not 0 <= seed < 2**64:
        raise ValidationError("seed must be a 64-bit unsigned integer")
    return [_decide(rec, _uniform(seed, i) < p) for i, rec in enumerate(trace)]


def _gains(trace: Trace) -> list[float]:
    return [rec.quality(2) - rec.quality(1) for rec in trace]


def _greedy_escalation_set(trace: Trace, budget_k: int) -> set[int]:
    """Indices of the top positive per-instance gains, up to the budget.

    Exact for separable metrics (accuracy, mean_score); used as the
    documented approximation for f1/mcc on large traces. Ties broken by
    trace order.
    """
    gains = _gains(trace)
    ranked = sorted((i for i in range(len(gains)) if gains[i] > 0.0), key=lambda i: (-gains[i], i))
    return set(ranked[:budget_k])


def _oracle_best_by_size(trace: Trace, metric: MetricSpec) -> tuple[tuple[float, int], ...]:
    """For each escalation-set size s, the best (value, bitmask) over all subsets.

    Enumerates all 2^n subsets in Gray-code order with O(1) incremental
    confusion updates; ties within a size resolve to the subset seen first.
    """
    positive = _metrics.positive_label_for(trace, metric)
    contrib1 = [_metrics.confusion_contribution(r.tier1_pred, r.gold_label, positive) for r in trace]
    contrib2 = [_metrics.confusion_contribution(r.tier2_pred, r.gold_label, positive) for r in trace]
    deltas = [tuple(b - a for a, b in zip(c1, c2)) for c1, c2 in zip(contrib1, contrib2)]
    value_of = _metrics.f1_raw if metric.kind == "f1" else _metrics.mcc_raw

    n = len(trace)
    tp = sum(c[0] for c in contrib1)
    fp = sum(c[1] for c in contrib1)
    tn = sum(c[2] for c in contrib1)
    fn = sum(c[3] for c in contrib1)

    neg_inf = float("-inf")
    best_value = [neg_inf] * (n + 1)
    best_mask = [0] * (n + 1)
    best_value[0] = value_of(tp, fp, tn, fn)

    mask = 0
    size = 0
    for g in range(1, 1 << n):
        j = (g & -g).bit_length() - 1  # bit flipped between consecutive Gray codes
        bit = 1 << j
        dtp, dfp, dtn, dfn = deltas[j]
        if mask & bit:
            mask ^= bit
            size -= 1
            tp -= dtp
            fp -= dfp
            tn -= dtn
            fn -= dfn
        else:
            mask ^= bit
            size += 1
            tp += dtp
            fp += dfp
            tn += dtn
            fn += dfn
        value = value_of(tp, fp, tn, fn)
        if value > best_value[size]:
            best_value[size] = value
            best_mask[size] = mask
    return tuple(zip(best_value, best_mask))


@lru_cache(maxsize=8)
def _oracle_table_cached(trace: Trace, metric: MetricSpec) -> tuple[tuple[float, int], ...]:
    return _oracle_best_by_size(trace, metric)


def route_oracle(trace: Trace, budget_k: int, metric: MetricSpec) -> list[RoutingDecision]:
    """Escalate at most budget_k records so aggregate performance is maximized.

    Gold-label access makes this an upper bound, not a deployable policy.
    Separable metrics are solved exactly by greedy on per-instance gains;
    f1/mcc are solved exactly by subset enumeration for n <= 20 and
    approximated by greedy-by-accuracy-gain beyond that.
    """
    n = len(trace)
    if not 0 <= budget_k <= n:
        raise ValidationError(f"oracle budget {budget_k} outside [0, {n}]")
    trace.validate_metric(metric)

    if metric.separable or n > EXACT_ORACLE_MAX_N:
        if not metric.separable:
            logger.warning(
                "oracle for %s on %d records falls back to greedy-by-accuracy-gain "
                "(exact search caps at n=%d)",
                metric.spec_id(), n, EXACT_ORACLE_MAX_N,
            )
        chosen = _greedy_escalation_set(trace, budget_k)
    else:
        table = _oracle_table_cached(trace, metric)
        best_size = 0
        best_value = float("-inf")
        for size in range(budget_k + 1):
            value, _ = table[size]
            if value > best_value:
                best_value = value
                best_size = size
        mask = table[best_size][1]
        chosen = {i for i in range(n) if mask >> i & 1}
    return [_decide(rec, i in chosen) for i, rec in enumerate(trace)]


def oracle_is_exact(trace: Trace, metric: MetricSpec) -> bool:
    return metric.separable or len(trace) <= EXACT_ORACLE_MAX_N


def route_oracle_cost(trace: Trace, budget_s: float, metric: MetricSpec) -> list[RoutingDecision]:
    """Oracle under a tier-2 cost budget (seconds) instead of a count.

    Greedy by gain-per-cost over records with positive gain; needs tier2_cost
    on every record. This is the heterogeneous-cost reading of the oracle's
    operating point.
    """
    if budget_s < 0:
        raise ValidationError("cost budget must be nonnegative")
    trace.validate_metric(metric)
    for rec in trace:
        if rec.tier2_cost is None:
            raise ValidationError(f"record {rec.id!r} has no tier2_cost; cost-budget oracle needs one")
    gains = _gains(trace)
    order = sorted(
        (i for i in range(len(trace)) if gains[i] > 0.0),
        key=lambda i: (-gains[i] / trace.records[i].tier2_cost, i)
        if trace.records[i].tier2_cost > 0
        else (float("-inf"), i),
    )
    # zero-cost positive gains are free: take them first
    free = [i for i in range(len(trace)) if gains[i] > 0.0 and trace.records[i].tier2_cost == 0]
    chosen: set[int] = set(free)
    spent = 0.0
    for i in order:
        if i in chosen:
            continue
        cost = trace.records[i].tier2_cost
        if spent + cost <= budget_s:
            chosen.add(i)
            spent += cost
    return [_decide(rec, i in chosen) for i, rec in enumerate(trace)]


def apply_policy(
    trace: Trace, policy: RoutingPolicy, metric: MetricSpec | None = None
) -> list[RoutingDecision]:
    if isinstance(policy, ThresholdPolicy):
        return route_threshold(trace, policy.t)
    if isinstance(policy, RandomPolicy):
        return route_random(trace, policy.p, policy.seed)
    if isinstance(policy, OraclePolicy):
        if metric is None:
            raise ValidationError("oracle policy needs a metric")
        return route_oracle(trace, policy.budget_k, metric)
    raise ValidationError(f"unknown policy {policy!r}")
