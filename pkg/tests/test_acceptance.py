"""Acceptance suite: one test per release criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`. Every tolerance is pinned
here; the oracle implementations (exhaustive searches, direct-definition
metrics, hand arithmetic) are local to this module and independent of the
library code paths they check.
"""

from __future__ import annotations

import itertools
import json
import math
import random
import time

from click.testing import CliRunner

from cascade.analysis import heatmap
from cascade.batchsim import SimConfig, simulate
from cascade.cli import main as cli_main
from cascade.costs import ConstantPerInstance, CostModel, LatencyTable
from cascade.curve import sweep, tier2_only_time, total_time
from cascade.fixtures import GenParams, generate
from cascade.gate import route_all, route_oracle, route_threshold
from cascade.gateway import GatewayCore, ReplayBackend, gateway_config_from_json
from cascade.metrics import confusion, evaluate, f1_from_counts, mcc_from_counts
from cascade.metrics import ConfusionCounts
from cascade.trace import MetricSpec, Trace, TraceMeta, TraceRecord

ACCURACY = MetricSpec("accuracy")
MEAN_SCORE = MetricSpec("mean_score")
F1 = MetricSpec("f1", "pos")
MCC = MetricSpec("mcc")

CONST_COST = CostModel(tier1=ConstantPerInstance(1.0), tier2=ConstantPerInstance(10.0))


def _passed(name: str) -> None:
    print(f"[PASS] {name}")


def _random_trace(rng: random.Random, n: int, *, scores: bool = False) -> Trace:
    records = []
    for i in range(n):
        if scores:
            records.append(
                TraceRecord(
                    id=f"r{i:04d}",
                    tier1_pred="a",
                    tier1_confidence=rng.random(),
                    tier2_pred="b",
                    tier1_score=rng.random(),
                    tier2_score=rng.random(),
                )
            )
        else:
            gold = ("neg", "pos")[i % 2] if i < 2 else rng.choice(("neg", "pos"))
            other = "neg" if gold == "pos" else "pos"
            records.append(
                TraceRecord(
                    id=f"r{i:04d}",
                    gold_label=gold,
                    tier1_pred=gold if rng.random() < 0.7 else other,
                    tier1_confidence=rng.random(),
                    tier2_pred=gold if rng.random() < 0.9 else other,
                )
            )
    return Trace(records=tuple(records), meta=TraceMeta())


# -- criterion 1: gate monotonicity -------------------------------------------


def test_gate_monotonicity():
    started = time.monotonic()
    rng = random.Random(1001)
    for _ in range(1000):
        trace = _random_trace(rng, 64)
        a, b = rng.random(), rng.random()
        t1, t2 = min(a, b), max(a, b)
        esc1 = {d.id for d in route_threshold(trace, t1) if d.escalated}
        esc2 = {d.id for d in route_threshold(trace, t2) if d.escalated}
        assert esc1 <= esc2
    elapsed = time.monotonic() - started
    assert elapsed < 10.0, f"runtime bound exceeded: {elapsed:.1f}s"
    _passed(f"gate monotonicity: 1000 traces, escalated(t1) subset of escalated(t2) ({elapsed:.1f}s)")


# -- criterion 2: endpoint identities ------------------------------------------


def test_endpoint_identities():
    started = time.monotonic()
    rng = random.Random(1002)
    for i in range(100):
        scores = i % 2 == 1
        metric = MEAN_SCORE if scores else ACCURACY
        trace = _random_trace(rng, rng.randint(1, 80), scores=scores)
        points = sweep(trace, metric, CONST_COST, "threshold")
        low = min(points, key=lambda p: p.escalation_fraction)
        high = max(points, key=lambda p: p.escalation_fraction)
        assert low.escalation_fraction == 0.0
        assert high.escalation_fraction == 1.0
        assert low.performance == evaluate(route_threshold(trace, 0.0), trace, metric)
        assert high.performance == evaluate(route_all(trace), trace, metric)
    elapsed = time.monotonic() - started
    assert elapsed < 5.0, f"runtime bound exceeded: {elapsed:.1f}s"
    _passed(f"endpoint identities: threshold-0 and escalate-all performances bitwise-exact ({elapsed:.1f}s)")


# -- criterion 3: cost formula -------------------------------------------------


def test_cost_formula_and_simulator_cross_check():
    records = tuple(
        TraceRecord(
            id=f"r{i:03d}", gold_label="pos", tier1_pred="pos",
            tier1_confidence=0.25 if i < 20 else 0.75, tier2_pred="pos",
        )
        for i in range(100)
    )
    trace = Trace(records=records, meta=TraceMeta())
    decisions = route_threshold(trace, 0.5)
    assert sum(1 for d in decisions if d.escalated) == 20
    t = total_time(decisions, trace, CONST_COST)
    assert t == 300.0
    speedup = tier2_only_time(trace, CONST_COST) / t
    assert abs(speedup - 10.0 / 3.0) <= 1e-9

    rng = random.Random(1003)
    cost = CostModel(tier1=ConstantPerInstance(0.007), tier2=ConstantPerInstance(0.093))
    config = SimConfig(b1=1, b2=1, cost=cost)
    for _ in range(100):
        rt = _random_trace(rng, rng.randint(1, 60))
        threshold = rng.random()
        makespan = simulate(rt, threshold, config).makespan_s
        expected = total_time(route_threshold(rt, threshold), rt, cost)
        assert abs(makespan - expected) <= 1e-9 * expected
    _passed("cost formula: 300s/3.3333x hand value and batchsim==curve at b1=b2=1 (1e-9 rel)")


# -- criterion 4: oracle exactness ---------------------------------------------


def _best_by_size_bitmask(values_per_record, base, value_of):
    """Exhaustive subset search by bitmask DP; independent of gate internals.

    values_per_record[i] is the 4-tuple count delta (or scalar gain) of
    escalating record i; value_of maps accumulated state to a metric value.
    """
    n = len(values_per_record)
    best = [float("-inf")] * (n + 1)
    states = [None] * (1 << n)
    states[0] = base
    best[0] = value_of(base)
    for mask in range(1, 1 << n):
        low = mask & -mask
        j = low.bit_length() - 1
        prev = states[mask ^ low]
        delta = values_per_record[j]
        if isinstance(prev, tuple):
            state = tuple(p + d for p, d in zip(prev, delta))
        else:
            state = prev + delta
        states[mask] = state
        size = mask.bit_count()
        value = value_of(state)
        if value > best[size]:
            best[size] = value
    for k in range(1, n + 1):
        best[k] = max(best[k], best[k - 1])
    return best


def test_oracle_exactness():
    started = time.monotonic()
    rng = random.Random(1004)

    # separable: accuracy, n <= 16, greedy must equal exhaustive search
    for _ in range(500):
        n = rng.randint(1, 16)
        trace = _random_trace(rng, n)
        gains = [
            (1 if r.tier2_pred == r.gold_label else 0) - (1 if r.tier1_pred == r.gold_label else 0)
            for r in trace
        ]
        base = sum(1 for r in trace if r.tier1_pred == r.gold_label)
        best = _best_by_size_bitmask(gains, base, lambda c: c)
        for k in range(n + 1):
            perf = evaluate(route_oracle(trace, k, ACCURACY), trace, ACCURACY)
            assert perf == best[k] / n

    # non-separable: f1 and mcc, n <= 12, exact subset search at every budget
    def f1_of(state):
        tp, fp, tn, fn = state
        return 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0

    def mcc_of(state):
        tp, fp, tn, fn = state
        d = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
        return (tp * tn - fp * fn) / math.sqrt(d) if d else 0.0

    def contribution(pred, gold):
        return (
            int(pred == "pos" and gold == "pos"),
            int(pred == "pos" and gold != "pos"),
            int(pred != "pos" and gold != "pos"),
            int(pred != "pos" and gold == "pos"),
        )

    for _ in range(500):
        n = rng.randint(2, 12)
        trace = _random_trace(rng, n)
        c1 = [contribution(r.tier1_pred, r.gold_label) for r in trace]
        c2 = [contribution(r.tier2_pred, r.gold_label) for r in trace]
        deltas = [tuple(b - a for a, b in zip(x, y)) for x, y in zip(c1, c2)]
        base = tuple(sum(c[k] for c in c1) for k in range(4))
        for metric, value_of in ((F1, f1_of), (MCC, mcc_of)):
            best = _best_by_size_bitmask(deltas, base, value_of)
            for k in range(n + 1):
                perf = evaluate(route_oracle(trace, k, metric), trace, metric)
                assert perf == best[k], (metric.spec_id(), n, k, perf, best[k])

    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"runtime bound exceeded: {elapsed:.1f}s"
    _passed(f"oracle exactness: greedy/exact equals exhaustive subset search at every budget ({elapsed:.1f}s)")


# -- criterion 5: metric oracles ------------------------------------------------


def _direct_f1(tp, fp, tn, fn):
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def _direct_mcc(tp, fp, tn, fn):
    for factor in (tp + fp, tp + fn, tn + fp, tn + fn):
        if factor == 0:
            return 0.0
    return (tp * tn - fp * fn) / (
        math.sqrt(tp + fp) * math.sqrt(tp + fn) * math.sqrt(tn + fp) * math.sqrt(tn + fn)
    )


def _trace_for_counts(tp, fp, tn, fn):
    records = []

    def add(pred, gold):
        i = len(records)
        records.append(
            TraceRecord(id=f"r{i:02d}", gold_label=gold, tier1_pred=pred,
                        tier1_confidence=0.5, tier2_pred=pred)
        )

    for _ in range(tp):
        add("pos", "pos")
    for _ in range(fp):
        add("pos", "neg")
    for _ in range(tn):
        add("neg", "neg")
    for _ in range(fn):
        add("neg", "pos")
    return Trace(records=tuple(records), meta=TraceMeta())


def test_metric_oracles():
    checked = 0
    for tp, fp, tn, fn in itertools.product(range(6), repeat=4):
        counts = ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)
        assert abs(f1_from_counts(counts) - _direct_f1(tp, fp, tn, fn)) <= 1e-12
        assert abs(mcc_from_counts(counts) - _direct_mcc(tp, fp, tn, fn)) <= 1e-12
        if tp + fp + tn + fn > 0:
            trace = _trace_for_counts(tp, fp, tn, fn)
            decisions = route_threshold(trace, 0.0)
            got = confusion(decisions, trace, "pos")
            assert (got.tp, got.fp, got.tn, got.fn) == (tp, fp, tn, fn)
            if len(trace.label_set()) == 2:  # evaluate() enforces the binary-gold invariant
                assert abs(evaluate(decisions, trace, F1) - _direct_f1(tp, fp, tn, fn)) <= 1e-12
                assert abs(evaluate(decisions, trace, MCC) - _direct_mcc(tp, fp, tn, fn)) <= 1e-12
        checked += 1
    assert checked == 1296
    # zero-denominator convention spot checks
    assert f1_from_counts(ConfusionCounts(0, 0, 5, 0)) == 0.0
    assert mcc_from_counts(ConfusionCounts(0, 0, 0, 0)) == 0.0
    assert mcc_from_counts(ConfusionCounts(5, 0, 0, 0)) == 0.0
    _passed("metric oracles: F1/MCC match direct definitions on all 1296 confusion matrices (1e-12)")


# -- criterion 6: sweep dominance ------------------------------------------------


def test_sweep_dominance():
    params = GenParams(
        tier1_easy_acc=0.95, tier1_hard_acc=0.5, tier2_acc=0.97,
        hard_fraction=0.4, confidence_separation=0.8,
    )
    num_seeds = 5
    for seed in (11, 22, 33):
        trace = generate(800, seed=seed, params=params)
        n = len(trace)
        threshold_points = sweep(trace, ACCURACY, CONST_COST, "threshold")
        threshold_by_count = {int(round(pt.escalations)): pt.performance for pt in threshold_points}
        oracle_by_budget = {
            int(pt.threshold): pt.performance
            for pt in sweep(trace, ACCURACY, CONST_COST, "oracle", oracle_max_points=n + 1)
        }
        # oracle dominates the threshold gate pointwise at matched escalation counts
        for pt in threshold_points:
            assert oracle_by_budget[int(round(pt.escalations))] >= pt.performance

        # threshold dominates the expected random curve (5-seed average) at the
        # random grid's escalation fractions, within a 2-sigma binomial margin
        q1 = [1.0 if r.tier1_pred == r.gold_label else 0.0 for r in trace]
        q2 = [1.0 if r.tier2_pred == r.gold_label else 0.0 for r in trace]
        random_points = sweep(
            trace, ACCURACY, CONST_COST, "random",
            seeds=[1000 * seed + j for j in range(num_seeds)],
        )
        for rpt in random_points:
            p = rpt.threshold  # escalation probability for the random family
            m = round(p * n)
            variance = sum(p * (1 - p) * (b - a) ** 2 for a, b in zip(q1, q2)) / n**2
            sigma_mean = math.sqrt(variance / num_seeds)
            assert threshold_by_count[m] >= rpt.performance - 2 * sigma_mean, (
                seed, p, threshold_by_count[m], rpt.performance,
            )
    _passed("sweep dominance: oracle >= threshold >= random-2sigma at matched escalation fractions")


# -- criterion 7: simulator arithmetic -------------------------------------------


def _uniform_trace(n, conf):
    records = tuple(
        TraceRecord(id=f"r{i:03d}", gold_label="x", tier1_pred="x",
                    tier1_confidence=conf, tier2_pred="x")
        for i in range(n)
    )
    return Trace(records=records, meta=TraceMeta())


def test_simulator_arithmetic():
    cost = CostModel(tier1=LatencyTable(((10, 0.05),)), tier2=LatencyTable(((20, 0.4),)))
    config = SimConfig(b1=10, b2=20, cost=cost)
    assert simulate(_uniform_trace(100, 0.9), 0.0, config).makespan_s == 0.5
    assert simulate(_uniform_trace(100, 0.1), 1.0, config).makespan_s == 2.5

    single_cost = CostModel(tier1=ConstantPerInstance(0.03), tier2=ConstantPerInstance(0.25))
    single = SimConfig(b1=4, b2=4, cost=single_cost)
    assert simulate(_uniform_trace(1, 0.9), 0.5, single).makespan_s == 0.03
    assert simulate(_uniform_trace(1, 0.1), 0.5, single).makespan_s == 0.28

    rng = random.Random(1007)
    for _ in range(200):
        trace = _random_trace(rng, rng.randint(1, 50))
        cfg = SimConfig(
            b1=rng.randint(1, 8),
            b2=rng.randint(1, 8),
            cost=CostModel(
                tier1=ConstantPerInstance(rng.uniform(0.001, 0.02)),
                tier2=ConstantPerInstance(rng.uniform(0.02, 0.2)),
            ),
        )
        t = rng.random()
        result = simulate(trace, t, cfg)
        tier1_ids = [i for ev in result.batch_log if ev.tier == 1 for i in ev.ids]
        tier2_ids = [i for ev in result.batch_log if ev.tier == 2 for i in ev.ids]
        assert sorted(tier1_ids) == sorted(r.id for r in trace)
        assert len(set(tier2_ids)) == len(tier2_ids)
        assert set(tier2_ids) == {r.id for r in trace if r.tier1_confidence < t}
        for prev, cur in zip(result.batch_log, result.batch_log[1:]):
            assert cur.start_s == prev.end_s
    _passed("simulator arithmetic: 0.5s/2.5s/singleton scenarios exact; conservation on 200 random configs")


# -- criterion 8: heatmap consistency ---------------------------------------------


def test_heatmap_consistency():
    rng = random.Random(1008)
    for _ in range(50):
        trace = _random_trace(rng, rng.randint(1, 120))
        totals = {(heatmap(trace, q).ft_total, heatmap(trace, q).tf_total) for q in (1, 2, 5, 10)}
        assert len(totals) == 1
        hm = heatmap(trace, 5)
        assert abs(math.fsum(r.population_fraction for r in hm.quantiles) - 1.0) <= 1e-9
        assert abs(math.fsum(r.ft_fraction for r in hm.quantiles) - hm.ft_total) <= 1e-9
        assert abs(math.fsum(r.tf_fraction for r in hm.quantiles) - hm.tf_total) <= 1e-9
    _passed("heatmap consistency: totals invariant over quantile counts; sums within 1e-9")


# -- criterion 9: gateway consistency ----------------------------------------------


class _CountingBackend:
    def __init__(self, inner):
        self.inner = inner
        self.calls = []

    def predict(self, inputs):
        self.calls.append(len(inputs))
        return self.inner.predict(inputs)


def test_gateway_consistency():
    started = time.monotonic()
    trace = generate(500, seed=77)
    assert max(r.tier1_confidence for r in trace) < 1.0  # threshold 1.0 escalates everything
    b2 = 16
    for threshold in (0.0, 0.5, 0.9, 1.0):
        config = gateway_config_from_json(
            {
                "threshold": threshold,
                "flush_policy": "end_of_stream",
                "tier1": {"endpoint": "inprocess://t1", "batch_size": 8, "timeout_s": 5.0},
                "tier2": {"endpoint": "inprocess://t2", "batch_size": b2, "timeout_s": 5.0},
            }
        )
        tier2 = _CountingBackend(ReplayBackend(trace, "tier2"))
        core = GatewayCore(config, ReplayBackend(trace, "tier1"), tier2)
        try:
            futures = {r.id: core.submit(r.id) for r in trace}
            core.flush()
            results = {rid: f.result(timeout=10) for rid, f in futures.items()}
        finally:
            core.close()
        expected = route_threshold(trace, threshold)
        m = sum(1 for d in expected if d.escalated)
        for d in expected:
            got = results[d.id]
            assert (got.tier_used == 2) == d.escalated, (threshold, d.id)
            assert got.label == d.final_pred, (threshold, d.id)
        assert len(tier2.calls) == math.ceil(m / b2), (threshold, m, tier2.calls)
        assert all(size == b2 for size in tier2.calls[:-1])
    elapsed = time.monotonic() - started
    assert elapsed < 30.0, f"runtime bound exceeded: {elapsed:.1f}s"
    _passed(f"gateway consistency: replay decisions equal offline gate; ceil(m/b2) tier-2 calls ({elapsed:.1f}s)")


# -- criterion 10: CLI determinism ---------------------------------------------------


def test_cli_determinism(tmp_path):
    runner = CliRunner()
    cost_path = tmp_path / "cost.json"
    cost_path.write_text(
        json.dumps(
            {
                "tier1": {"kind": "table", "points": [[1, 0.002], [8, 0.008]]},
                "tier2": {"kind": "constant", "seconds_per_instance": 0.02},
            }
        )
    )

    def run_all(root):
        root.mkdir()
        trace_path = root / "t.jsonl"
        commands = [
            ["generate", "--n", "120", "--seed", "9", "--out", str(trace_path)],
            ["sweep", "--trace", str(trace_path), "--cost", str(cost_path), "--policy", "all",
             "--seed", "5", "--out", str(root / "sweep"), "--plot"],
            ["calibrate", "--trace", str(trace_path), "--cost", str(cost_path),
             "--out", str(root / "speedup.json")],
            ["simulate", "--trace", str(trace_path), "--threshold", "0.6",
             "--cost", str(cost_path), "--b1", "8", "--b2", "4", "--out", str(root / "sim")],
            ["simulate", "--trace", str(trace_path), "--cost", str(cost_path), "--compare",
             "--thresholds", "0,0.5,1", "--b1", "8", "--b2", "4", "--out", str(root / "cmp")],
            ["analyze", "--trace", str(trace_path), "--out", str(root / "heatmap.csv"), "--plot"],
        ]
        for args in commands:
            result = runner.invoke(cli_main, args)
            assert result.exit_code == 0, (args, result.output)

    run_all(tmp_path / "a")
    run_all(tmp_path / "b")

    data_files = [
        "t.jsonl",
        "sweep/curve_threshold.csv",
        "sweep/curve_random.csv",
        "sweep/curve_oracle.csv",
        "sweep/sweep_summary.json",
        "sweep/tradeoff.png",
        "speedup.json",
        "sim/batch_log.csv",
        "sim/sim_summary.json",
        "cmp/throughput_compare.csv",
        "heatmap.csv",
        "heatmap.png",
    ]
    for name in data_files:
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b, f"{name} differs between reruns"
    _passed("determinism: all CLI data outputs byte-identical across reruns")
