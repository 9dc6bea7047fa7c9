"""Per-tier inference cost models and batch-latency arithmetic.

A tier's cost is either a constant per-instance time or an empirically
measured latency table (batch size -> batch latency). Batched time charges
every full batch at its tabulated latency and the residual batch at its own
interpolated latency; interpolation queries are clamped to the table's
batch-size range.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError


@dataclass(frozen=True)
class ConstantPerInstance:
    seconds_per_instance: float

    def __post_init__(self):
        if not math.isfinite(self.seconds_per_instance) or self.seconds_per_instance <= 0:
            raise ValidationError(f"per-instance cost must be positive, got {self.seconds_per_instance}")

    def latency(self, batch_size: int) -> float:
        return self.seconds_per_instance * batch_size


@dataclass(frozen=True)
class LatencyTable:
    points: tuple[tuple[int, float], ...]  # (batch_size, latency_s), batch sizes increasing

    def __post_init__(self):
        if not self.points:
            raise ValidationError("latency table has no points")
        last = 0
        for bs, lat in self.points:
            if not isinstance(bs, int) or bs <= last:
                raise ValidationError(f"batch sizes must be strictly increasing positive ints, got {bs}")
            if not math.isfinite(lat) or lat <= 0:
                raise ValidationError(f"latency must be strictly positive, got {lat} at batch size {bs}")
            last = bs

    def latency(self, batch_size: int) -> float:
        """Interpolated latency of one batch; queries clamp to the table range."""
        pts = self.points
        if batch_size <= pts[0][0]:
            return pts[0][1]
        if batch_size >= pts[-1][0]:
            return pts[-1][1]
        for (b0, l0), (b1, l1) in zip(pts, pts[1:]):
            if b0 <= batch_size <= b1:
                frac = (batch_size - b0) / (b1 - b0)
                return l0 + frac * (l1 - l0)
        raise AssertionError("unreachable")


TierCost = ConstantPerInstance | LatencyTable


@dataclass(frozen=True)
class CostModel:
    tier1: TierCost | None = None
    tier2: TierCost | None = None

    def for_tier(self, tier: int) -> TierCost | None:
        return self.tier1 if tier == 1 else self.tier2


def batched_time(cost: TierCost, count: int, batch_size: int) -> float:
    """Total time to run `count` instances in sequential batches of `batch_size`."""
    if count < 0:
        raise ValidationError("instance count must be nonnegative")
    if batch_size < 1:
        raise ValidationError("batch size must be >= 1")
    if count == 0:
        return 0.0
    if isinstance(cost, ConstantPerInstance):
        # no batching effect by definition
        return count * cost.seconds_per_instance
    full, residual = divmod(count, batch_size)
    total = full * cost.latency(batch_size)
    if residual:
        total += cost.latency(residual)
    return total


def optimal_batch_size(table: LatencyTable) -> int:
    """The tabulated batch size minimizing per-instance latency; ties pick the smaller."""
    best_bs, best_per = table.points[0][0], table.points[0][1] / table.points[0][0]
    for bs, lat in table.points[1:]:
        per = lat / bs
        if per < best_per:
            best_bs, best_per = bs, per
    return best_bs


def tier_cost_from_json(obj: dict) -> TierCost:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("tier cost spec must be an object with a 'kind'")
    if obj["kind"] == "constant":
        if "seconds_per_instance" not in obj:
            raise ValidationError("constant cost needs 'seconds_per_instance'")
        return ConstantPerInstance(float(obj["seconds_per_instance"]))
    if obj["kind"] == "table":
        points = obj.get("points")
        if not isinstance(points, list):
            raise ValidationError("table cost needs a 'points' list of [batch_size, latency_s]")
        parsed = []
        for item in points:
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise ValidationError(f"bad latency table point {item!r}")
            parsed.append((int(item[0]), float(item[1])))
        return LatencyTable(tuple(parsed))
    raise ValidationError(f"unknown cost kind {obj['kind']!r}")


def tier_cost_to_json(cost: TierCost) -> dict:
    if isinstance(cost, ConstantPerInstance):
        return {"kind": "constant", "seconds_per_instance": cost.seconds_per_instance}
    return {"kind": "table", "points": [[bs, lat] for bs, lat in cost.points]}


def cost_model_from_json(obj: dict) -> CostModel:
    if not isinstance(obj, dict):
        raise ValidationError("cost model must be a JSON object")
    tier1 = tier_cost_from_json(obj["tier1"]) if "tier1" in obj else None
    tier2 = tier_cost_from_json(obj["tier2"]) if "tier2" in obj else None
    return CostModel(tier1=tier1, tier2=tier2)


def load_cost_model(path: str | Path) -> CostModel:
    with Path(path).open(encoding="utf-8") as fh:
        return cost_model_from_json(json.load(fh))


def load_latency_table(path: str | Path) -> LatencyTable:
    """Parse a standalone latency-table file (as written by an exporter)."""
    with Path(path).open(encoding="utf-8") as fh:
        obj = json.load(fh)
    cost = tier_cost_from_json(obj)
    if not isinstance(cost, LatencyTable):
        raise ValidationError("file does not contain a latency table")
    return cost
