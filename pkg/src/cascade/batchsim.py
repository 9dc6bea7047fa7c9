"""Deterministic discrete-event simulation of batch-accumulation execution.

The trace stream is consumed in tier-1 batches; records gated below the
confidence threshold accumulate in an escalation queue, and a tier-2 batch
runs whenever the queue reaches the tier-2 batch size. Both tiers share one
sequential CPU timeline, so batch latencies simply add; the end of the
stream always flushes a final partial tier-2 batch. Batch latencies come
from the CostModel (per-record measured costs play no role here).

Tier-2 batches interleave with tier-1 processing (queue-triggered). Under
the sequential-sum execution model the makespan is invariant to that
ordering choice.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ._util import NeumaierSum
from .costs import CostModel, TierCost
from .errors import ValidationError
from .trace import Trace, TraceRecord


@dataclass(frozen=True)
class EndOfStreamOnly:
    """Partial tier-2 batches flush only when the stream ends."""


@dataclass(frozen=True)
class MaxWait:
    """Partial tier-2 batches also flush once the oldest queued record has
    waited timeout_s (checked at batch boundaries; the shared CPU cannot be
    preempted mid-batch)."""

    timeout_s: float

    def __post_init__(self):
        if not math.isfinite(self.timeout_s) or self.timeout_s <= 0:
            raise ValidationError(f"MaxWait timeout must be positive, got {self.timeout_s}")


FlushPolicy = EndOfStreamOnly | MaxWait

SEQUENTIAL_SHARED_CPU = "sequential-shared-cpu"


@dataclass(frozen=True)
class SimConfig:
    b1: int
    b2: int
    cost: CostModel
    flush_policy: FlushPolicy = EndOfStreamOnly()
    execution: str = SEQUENTIAL_SHARED_CPU

    def __post_init__(self):
        if self.b1 < 1 or self.b2 < 1:
            raise ValidationError(f"batch sizes must be >= 1, got b1={self.b1}, b2={self.b2}")
        if self.execution != SEQUENTIAL_SHARED_CPU:
            raise ValidationError(f"unknown execution model {self.execution!r}")


@dataclass(frozen=True)
class BatchEvent:
    tier: int
    batch_size: int
    start_s: float
    end_s: float
    ids: tuple[str, ...]


@dataclass(frozen=True)
class SimResult:
    makespan_s: float
    throughput_per_s: float
    per_instance_completion: dict[str, float]
    batch_log: tuple[BatchEvent, ...]


def _batch_latency(cost: TierCost | None, tier: int, size: int) -> float:
    if cost is None:
        raise ValidationError(f"simulation needs a tier-{tier} cost model")
    return cost.latency(size)


def simulate(trace: Trace, threshold: float, config: SimConfig) -> SimResult:
    """Run the batch-accumulation schedule over the trace stream."""
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError(f"threshold {threshold} outside [0, 1]")
    clock = NeumaierSum()
    log: list[BatchEvent] = []
    completion: dict[str, float] = {}
    queue: deque[TraceRecord] = deque()
    enqueued_at: deque[float] = deque()

    def run_batch(tier: int, records: Sequence[TraceRecord]) -> None:
        latency = _batch_latency(config.cost.for_tier(tier), tier, len(records))
        start = clock.value
        clock.add(latency)
        end = clock.value
        log.append(
            BatchEvent(
                tier=tier,
                batch_size=len(records),
                start_s=start,
                end_s=end,
                ids=tuple(r.id for r in records),
            )
        )
        for rec in records:
            completion[rec.id] = end

    def drain_full_batches() -> None:
        while len(queue) >= config.b2:
            batch = [queue.popleft() for _ in range(config.b2)]
            for _ in range(config.b2):
                enqueued_at.popleft()
            run_batch(2, batch)

    def flush_partial() -> None:
        if queue:
            batch = list(queue)
            queue.clear()
            enqueued_at.clear()
            run_batch(2, batch)

    stream = list(trace)
    pos = 0
    while pos < len(stream):
        if (
            isinstance(config.flush_policy, MaxWait)
            and enqueued_at
            and clock.value - enqueued_at[0] >= config.flush_policy.timeout_s
        ):
            batch = [queue.popleft() for _ in range(min(config.b2, len(queue)))]
            for _ in range(len(batch)):
                enqueued_at.popleft()
            run_batch(2, batch)
            continue
        batch = stream[pos : pos + config.b1]
        pos += len(batch)
        run_batch(1, batch)
        arrival = clock.value
        for rec in batch:
            if rec.tier1_confidence < threshold:
                queue.append(rec)
                enqueued_at.append(arrival)
        drain_full_batches()

    drain_full_batches()
    flush_partial()

    makespan = clock.value
    return SimResult(
        makespan_s=makespan,
        throughput_per_s=len(trace) / makespan,
        per_instance_completion=completion,
        batch_log=tuple(log),
    )


@dataclass(frozen=True)
class ThroughputRow:
    threshold: float
    throughput_bs1_per_s: float
    throughput_opt_per_s: float
    ratio: float


def compare_batch1_vs_optimal(
    trace: Trace,
    thresholds: Sequence[float],
    config_b1: SimConfig,
    config_opt: SimConfig,
) -> list[ThroughputRow]:
    """Throughput at each threshold with batch size 1 vs the optimized batch sizes."""
    if config_b1.b1 != 1 or config_b1.b2 != 1:
        raise ValidationError("config_b1 must use batch size 1 on both tiers")
    rows = []
    for t in thresholds:
        tp1 = simulate(trace, t, config_b1).throughput_per_s
        tp_opt = simulate(trace, t, config_opt).throughput_per_s
        rows.append(
            ThroughputRow(
                threshold=t,
                throughput_bs1_per_s=tp1,
                throughput_opt_per_s=tp_opt,
                ratio=tp_opt / tp1,
            )
        )
    return rows


BATCH_LOG_CSV_HEADER = "tier,batch_size,start_s,end_s"


def batch_log_to_csv(result: SimResult) -> str:
    lines = [BATCH_LOG_CSV_HEADER]
    for ev in result.batch_log:
        lines.append(f"{ev.tier},{ev.batch_size},{format(ev.start_s, '.9g')},{format(ev.end_s, '.9g')}")
    return "\n".join(lines) + "\n"


def write_batch_log_csv(result: SimResult, path: str | Path) -> None:
    Path(path).write_text(batch_log_to_csv(result), encoding="utf-8")
