"""Live cascade gateway: tier-1 everything, batch low-confidence escalations to tier-2.

Wire protocol (JSON over HTTP):
  backend:  POST /predict  {"inputs": [{"id": "...", "text": "..."}, ...]}
                        -> {"labels": [...], "confidences": [...]}
  gateway:  POST /classify {"id": "...", "text": "..."}
                        -> {"id", "label", "confidence", "tier_used", "latency_s", "degraded"}
            GET  /counters
            POST /flush    dispatches everything queued (the end-of-stream signal)

The gateway answers from tier-1 when its confidence reaches the threshold;
otherwise the request joins the escalation queue and is answered once its
tier-2 batch runs (queue reached the tier-2 batch size, max_wait elapsed,
or an explicit flush). The returned confidence is always the tier-1 gate
confidence; traces carry no tier-2 confidence, so replay tier-2 backends
report a placeholder of 1.0.
"""

# no `from __future__ import annotations` here: FastAPI must resolve the
# closure-local pydantic request models at runtime

import json
import logging
import threading
import time
from collections import deque
from concurrent.futures import Future
from concurrent.futures import TimeoutError as FutureTimeoutError
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from .errors import UpstreamError, ValidationError
from .trace import Trace

logger = logging.getLogger(__name__)

FLUSH_MAX_WAIT = "max_wait"
FLUSH_END_OF_STREAM = "end_of_stream"
FALLBACK_FAIL = "fail"
FALLBACK_DEGRADE = "degrade"


@dataclass(frozen=True)
class BackendDescriptor:
    endpoint: str
    batch_size: int
    timeout_s: float
    role: str  # "tier1" | "tier2"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError(f"backend batch_size must be >= 1, got {self.batch_size}")
        if self.timeout_s <= 0:
            raise ValidationError(f"backend timeout must be positive, got {self.timeout_s}")
        if self.role not in ("tier1", "tier2"):
            raise ValidationError(f"backend role must be tier1 or tier2, got {self.role!r}")


@dataclass(frozen=True)
class GatewayConfig:
    threshold: float
    tier1: BackendDescriptor
    tier2: BackendDescriptor
    max_wait_s: float = 0.1
    flush_policy: str = FLUSH_MAX_WAIT
    tier2_fallback: str = FALLBACK_FAIL
    counters_enabled: bool = True

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValidationError(f"threshold {self.threshold} outside [0, 1]")
        if self.max_wait_s <= 0:
            raise ValidationError(f"max_wait must be positive, got {self.max_wait_s}")
        if self.flush_policy not in (FLUSH_MAX_WAIT, FLUSH_END_OF_STREAM):
            raise ValidationError(f"unknown flush policy {self.flush_policy!r}")
        if self.tier2_fallback not in (FALLBACK_FAIL, FALLBACK_DEGRADE):
            raise ValidationError(f"unknown tier2 fallback {self.tier2_fallback!r}")


def gateway_config_from_json(obj: dict) -> GatewayConfig:
    def backend(key: str) -> BackendDescriptor:
        spec = obj.get(key)
        if not isinstance(spec, dict) or "endpoint" not in spec:
            raise ValidationError(f"gateway config needs a {key!r} backend with an endpoint")
        return BackendDescriptor(
            endpoint=spec["endpoint"],
            batch_size=int(spec.get("batch_size", 1)),
            timeout_s=float(spec.get("timeout_s", 10.0)),
            role=key,
        )

    if "threshold" not in obj:
        raise ValidationError("gateway config needs a threshold")
    return GatewayConfig(
        threshold=float(obj["threshold"]),
        tier1=backend("tier1"),
        tier2=backend("tier2"),
        max_wait_s=float(obj.get("max_wait_s", 0.1)),
        flush_policy=obj.get("flush_policy", FLUSH_MAX_WAIT),
        tier2_fallback=obj.get("tier2_fallback", FALLBACK_FAIL),
        counters_enabled=bool(obj.get("counters_enabled", True)),
    )


def load_gateway_config(path: str | Path) -> GatewayConfig:
    with Path(path).open(encoding="utf-8") as fh:
        return gateway_config_from_json(json.load(fh))


class Backend(Protocol):
    def predict(self, inputs: Sequence[dict]) -> tuple[list[str], list[float]]: ...


class ReplayBackend:
    """Serves stored trace predictions by record id; no ML runtime involved."""

    def __init__(self, trace: Trace, role: str):
        if role not in ("tier1", "tier2"):
            raise ValidationError(f"replay role must be tier1 or tier2, got {role!r}")
        self.role = role
        self._by_id = trace.by_id()

    def predict(self, inputs: Sequence[dict]) -> tuple[list[str], list[float]]:
        labels: list[str] = []
        confidences: list[float] = []
        for item in inputs:
            rec = self._by_id.get(item.get("id"))
            if rec is None:
                raise UpstreamError(f"unknown record id {item.get('id')!r}")
            if self.role == "tier1":
                labels.append(rec.tier1_pred)
                confidences.append(rec.tier1_confidence)
            else:
                labels.append(rec.tier2_pred)
                confidences.append(1.0)
        return labels, confidences


class HttpBackend:
    """Client for the backend wire protocol."""

    def __init__(self, endpoint: str, timeout_s: float):
        import httpx

        self.endpoint = endpoint
        self._client = httpx.Client(timeout=timeout_s)

    def predict(self, inputs: Sequence[dict]) -> tuple[list[str], list[float]]:
        import httpx

        try:
            resp = self._client.post(self.endpoint, json={"inputs": list(inputs)})
        except httpx.HTTPError as exc:
            raise UpstreamError(f"backend {self.endpoint} unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise UpstreamError(f"backend {self.endpoint} returned {resp.status_code}: {resp.text[:200]}")
        body = resp.json()
        labels = body.get("labels")
        confidences = body.get("confidences")
        if not isinstance(labels, list) or not isinstance(confidences, list) or len(labels) != len(inputs):
            raise UpstreamError(f"backend {self.endpoint} returned a malformed response")
        return labels, [float(c) for c in confidences]

    def close(self) -> None:
        self._client.close()


@dataclass(frozen=True)
class ClassifyResult:
    id: str
    label: str
    confidence: float
    tier_used: int
    latency_s: float
    degraded: bool = False


@dataclass
class _Pending:
    id: str
    text: str
    future: Future
    submitted_at: float
    tier1_label: str | None = None
    tier1_confidence: float | None = None
    enqueued_at: float = 0.0


class _TierStats:
    def __init__(self):
        self.calls = 0
        self.total_s = 0.0
        self.min_s = float("inf")
        self.max_s = 0.0

    def record(self, elapsed: float) -> None:
        self.calls += 1
        self.total_s += elapsed
        self.min_s = min(self.min_s, elapsed)
        self.max_s = max(self.max_s, elapsed)

    def summary(self) -> dict:
        if self.calls == 0:
            return {"calls": 0, "mean_s": 0.0, "min_s": 0.0, "max_s": 0.0}
        return {
            "calls": self.calls,
            "mean_s": self.total_s / self.calls,
            "min_s": self.min_s,
            "max_s": self.max_s,
        }


class GatewayCore:
    """Transport-independent gateway: micro-batching, gating, escalation queue.

    Thread-safe: submit() may be called from any number of threads. One
    tier-1 worker and one tier-2 dispatcher serialize backend calls, so
    batches fill naturally under concurrent load.
    """

    def __init__(self, config: GatewayConfig, tier1: Backend, tier2: Backend):
        self.config = config
        self.tier1 = tier1
        self.tier2 = tier2

        self._lock = threading.Lock()
        self._t1_cv = threading.Condition(self._lock)
        self._t2_cv = threading.Condition(self._lock)
        self._t1_queue: deque[_Pending] = deque()
        self._t2_queue: deque[_Pending] = deque()
        self._t1_busy = False
        self._t2_busy = False
        self._flush_requested = False
        self._closed = False

        self._total = 0
        self._escalated = 0
        self._tier2_batches = 0
        self._tier2_dispatched = 0
        self._stats = {1: _TierStats(), 2: _TierStats()}

        self._t1_worker = threading.Thread(target=self._tier1_loop, name="gateway-tier1", daemon=True)
        self._t2_worker = threading.Thread(target=self._tier2_loop, name="gateway-tier2", daemon=True)
        self._t1_worker.start()
        self._t2_worker.start()

    # -- client surface ----------------------------------------------------

    def submit(self, request_id: str, text: str = "") -> Future:
        pending = _Pending(id=request_id, text=text, future=Future(), submitted_at=time.monotonic())
        with self._lock:
            if self._closed:
                raise UpstreamError("gateway is shut down")
            self._t1_queue.append(pending)
            self._t1_cv.notify()
        return pending.future

    def classify(self, request_id: str, text: str = "", timeout: float | None = None) -> ClassifyResult:
        if timeout is None:
            timeout = (
                self.config.tier1.timeout_s + self.config.tier2.timeout_s + self.config.max_wait_s + 5.0
            )
        future = self.submit(request_id, text)
        try:
            return future.result(timeout=timeout)
        except (TimeoutError, FutureTimeoutError) as exc:
            raise UpstreamError(f"request {request_id!r} timed out after {timeout}s") from exc

    def flush(self) -> None:
        """Dispatch everything currently queued (the end-of-stream signal).

        Blocks until all requests submitted before the call are answered.
        """
        with self._lock:
            self._t1_cv.wait_for(lambda: not self._t1_queue and not self._t1_busy)
            self._flush_requested = True
            self._t2_cv.notify()
            self._t2_cv.wait_for(lambda: not self._t2_queue and not self._t2_busy)
            self._flush_requested = False

    def counters(self) -> dict:
        with self._lock:
            fill = self._tier2_dispatched / self._tier2_batches if self._tier2_batches else 0.0
            return {
                "total": self._total,
                "escalated": self._escalated,
                "tier2_batches": self._tier2_batches,
                "mean_batch_fill": fill,
                "per_tier_latency_summary": {
                    "tier1": self._stats[1].summary(),
                    "tier2": self._stats[2].summary(),
                },
            }

    def close(self) -> None:
        with self._lock:
            self._closed = True
            self._t1_cv.notify_all()
            self._t2_cv.notify_all()
        self._t1_worker.join(timeout=5)
        self._t2_worker.join(timeout=5)
        for queue in (self._t1_queue, self._t2_queue):
            while queue:
                pending = queue.popleft()
                if not pending.future.done():
                    pending.future.set_exception(UpstreamError("gateway shut down"))

    # -- workers -------------------------------------------------------------

    def _tier1_loop(self) -> None:
        while True:
            with self._lock:
                self._t1_cv.wait_for(lambda: self._t1_queue or self._closed)
                if self._closed:
                    return
                batch = [
                    self._t1_queue.popleft()
                    for _ in range(min(self.config.tier1.batch_size, len(self._t1_queue)))
                ]
                self._t1_busy = True
            started = time.monotonic()
            try:
                labels, confidences = self.tier1.predict(
                    [{"id": p.id, "text": p.text} for p in batch]
                )
            except Exception as exc:
                upstream = exc if isinstance(exc, UpstreamError) else UpstreamError(str(exc))
                for pending in batch:
                    pending.future.set_exception(upstream)
                with self._lock:
                    self._t1_busy = False
                    self._t1_cv.notify_all()
                continue
            elapsed = time.monotonic() - started
            now = time.monotonic()
            escalations: list[_Pending] = []
            results: list[tuple[_Pending, ClassifyResult]] = []
            for pending, label, confidence in zip(batch, labels, confidences):
                pending.tier1_label = label
                pending.tier1_confidence = confidence
                if confidence >= self.config.threshold:
                    results.append(
                        (
                            pending,
                            ClassifyResult(
                                id=pending.id,
                                label=label,
                                confidence=confidence,
                                tier_used=1,
                                latency_s=now - pending.submitted_at,
                            ),
                        )
                    )
                else:
                    pending.enqueued_at = now
                    escalations.append(pending)
            with self._lock:
                self._stats[1].record(elapsed)
                self._total += len(batch)
                self._escalated += len(escalations)
                self._t2_queue.extend(escalations)
                if escalations:
                    self._t2_cv.notify()
                self._t1_busy = False
                self._t1_cv.notify_all()
            for pending, result in results:
                pending.future.set_result(result)

    def _t2_ready(self) -> bool:
        if self._closed or (self._flush_requested and self._t2_queue):
            return True
        if len(self._t2_queue) >= self.config.tier2.batch_size:
            return True
        if (
            self.config.flush_policy == FLUSH_MAX_WAIT
            and self._t2_queue
            and time.monotonic() - self._t2_queue[0].enqueued_at >= self.config.max_wait_s
        ):
            return True
        return False

    def _tier2_loop(self) -> None:
        while True:
            with self._lock:
                while not self._t2_ready():
                    if self.config.flush_policy == FLUSH_MAX_WAIT and self._t2_queue:
                        deadline = self._t2_queue[0].enqueued_at + self.config.max_wait_s
                        self._t2_cv.wait(timeout=max(deadline - time.monotonic(), 0.001))
                    else:
                        self._t2_cv.wait()
                if self._closed:
                    return
                batch = [
                    self._t2_queue.popleft()
                    for _ in range(min(self.config.tier2.batch_size, len(self._t2_queue)))
                ]
                self._t2_busy = True
            started = time.monotonic()
            try:
                labels, _ = self.tier2.predict([{"id": p.id, "text": p.text} for p in batch])
            except Exception as exc:
                upstream = exc if isinstance(exc, UpstreamError) else UpstreamError(str(exc))
                self._resolve_tier2_failure(batch, upstream)
                with self._lock:
                    self._t2_busy = False
                    self._t2_cv.notify_all()
                continue
            elapsed = time.monotonic() - started
            now = time.monotonic()
            with self._lock:
                self._stats[2].record(elapsed)
                self._tier2_batches += 1
                self._tier2_dispatched += len(batch)
                self._t2_busy = False
                self._t2_cv.notify_all()
            for pending, label in zip(batch, labels):
                pending.future.set_result(
                    ClassifyResult(
                        id=pending.id,
                        label=label,
                        confidence=pending.tier1_confidence,
                        tier_used=2,
                        latency_s=now - pending.submitted_at,
                    )
                )

    def _resolve_tier2_failure(self, batch: list[_Pending], error: UpstreamError) -> None:
        if self.config.tier2_fallback == FALLBACK_DEGRADE:
            logger.warning("tier-2 backend failed, degrading %d request(s) to tier-1: %s", len(batch), error)
            now = time.monotonic()
            for pending in batch:
                pending.future.set_result(
                    ClassifyResult(
                        id=pending.id,
                        label=pending.tier1_label,
                        confidence=pending.tier1_confidence,
                        tier_used=1,
                        latency_s=now - pending.submitted_at,
                        degraded=True,
                    )
                )
        else:
            for pending in batch:
                pending.future.set_exception(error)


def replay_core(trace: Trace, config: GatewayConfig) -> GatewayCore:
    """Gateway wired to in-process replay backends for both tiers."""
    return GatewayCore(config, ReplayBackend(trace, "tier1"), ReplayBackend(trace, "tier2"))


# -- HTTP layer (FastAPI apps) -------------------------------------------


def build_gateway_app(core: GatewayCore):
    from contextlib import asynccontextmanager

    from fastapi import FastAPI, HTTPException
    from pydantic import BaseModel

    class ClassifyRequest(BaseModel):
        id: str
        text: str = ""

    @asynccontextmanager
    async def lifespan(_app):
        yield
        core.close()

    app = FastAPI(title="cascade-gateway", lifespan=lifespan)

    @app.post("/classify")
    def classify(req: ClassifyRequest) -> dict:
        try:
            result = core.classify(req.id, req.text)
        except UpstreamError as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        return {
            "id": result.id,
            "label": result.label,
            "confidence": result.confidence,
            "tier_used": result.tier_used,
            "latency_s": result.latency_s,
            "degraded": result.degraded,
        }

    @app.post("/flush")
    def flush() -> dict:
        core.flush()
        return {"flushed": True}

    @app.get("/counters")
    def counters() -> dict:
        if not core.config.counters_enabled:
            raise HTTPException(status_code=404, detail="counters are disabled")
        return core.counters()

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    return app


def build_replay_app(trace: Trace, role: str):
    from fastapi import FastAPI, HTTPException
    from pydantic import BaseModel

    class PredictRequest(BaseModel):
        inputs: list[dict]

    backend = ReplayBackend(trace, role)
    app = FastAPI(title=f"cascade-replay-{role}")

    @app.post("/predict")
    def predict(req: PredictRequest) -> dict:
        try:
            labels, confidences = backend.predict(req.inputs)
        except UpstreamError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {"labels": labels, "confidences": confidences}

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    return app
