"""Synthetic classification traces with a simple/complex instance structure.

Easy instances get high tier-1 confidence and accuracy; hard instances get
low confidence and accuracy. confidence_separation in [0, 1] controls how
far apart the two confidence ranges sit: at 1.0 they are disjoint around
0.5, at 0.0 both span [0, 1] (modes still differ).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import ValidationError
from .trace import MetricSpec, Trace, TraceMeta, TraceRecord

LABELS = ("neg", "pos")


@dataclass(frozen=True)
class GenParams:
    tier1_easy_acc: float = 0.95
    tier1_hard_acc: float = 0.55
    tier2_acc: float = 0.92
    hard_fraction: float = 0.3
    confidence_separation: float = 0.6

    def __post_init__(self):
        for name in (
            "tier1_easy_acc",
            "tier1_hard_acc",
            "tier2_acc",
            "hard_fraction",
            "confidence_separation",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {value}")


def _confidence(rng: random.Random, hard: bool, separation: float) -> float:
    if hard:
        hi = 1.0 - 0.5 * separation
        return rng.triangular(0.0, hi, 0.2 * hi)
    lo = 0.5 * separation
    return rng.triangular(lo, 1.0, lo + 0.8 * (1.0 - lo))


def generate(
    n: int,
    seed: int,
    params: GenParams = GenParams(),
    dataset: str = "synthetic",
    metric: MetricSpec | None = None,
) -> Trace:
    """Deterministic synthetic trace of n binary-classification records."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    rng = random.Random(seed)
    width = max(4, len(str(n - 1)))
    records = []
    for i in range(n):
        hard = rng.random() < params.hard_fraction
        gold = LABELS[rng.randrange(2)]
        other = LABELS[1] if gold == LABELS[0] else LABELS[0]
        tier1_acc = params.tier1_hard_acc if hard else params.tier1_easy_acc
        tier1_pred = gold if rng.random() < tier1_acc else other
        tier2_pred = gold if rng.random() < params.tier2_acc else other
        records.append(
            TraceRecord(
                id=f"r{i:0{width}d}",
                gold_label=gold,
                tier1_pred=tier1_pred,
                tier1_confidence=_confidence(rng, hard, params.confidence_separation),
                tier2_pred=tier2_pred,
            )
        )
    meta = TraceMeta(
        dataset=dataset,
        metric=metric.spec_id() if metric else "accuracy",
        tier1_model="synthetic-tier1",
        tier2_model="synthetic-tier2",
    )
    return Trace(records=tuple(records), meta=meta)
