"""Trace-driven evaluation toolkit for confidence-gated two-tier cascaded inference."""

__version__ = "0.1.0"
TRACE_FORMAT_VERSION = "1"

from .trace import MetricSpec, Trace, TraceMeta, TraceRecord, load_trace, write_trace  # noqa: E402,F401
from .gate import (  # noqa: E402,F401
    OraclePolicy,
    RandomPolicy,
    RoutingDecision,
    ThresholdPolicy,
    route_oracle,
    route_random,
    route_threshold,
)
from .metrics import ConfusionCounts, confusion, evaluate  # noqa: E402,F401
from .costs import ConstantPerInstance, CostModel, LatencyTable, optimal_batch_size  # noqa: E402,F401
from .curve import CurvePoint, speedup_at, sweep, total_time  # noqa: E402,F401
from .batchsim import SimConfig, SimResult, compare_batch1_vs_optimal, simulate  # noqa: E402,F401
from .analysis import QuantileHeatmap, heatmap  # noqa: E402,F401
from .fixtures import GenParams, generate  # noqa: E402,F401
