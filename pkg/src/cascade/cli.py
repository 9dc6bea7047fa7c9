"""Command-line entry point for reproducible cascade experiments.

Exit codes: 0 success, 2 usage, 3 validation, 4 I/O, 5 upstream/backend.
All randomness flows through --seed; reruns with identical inputs and flags
produce byte-identical data outputs (manifest sidecars carry the only
timestamps).
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import TRACE_FORMAT_VERSION, __version__, analysis, batchsim, curve, fixtures, gate, metrics
from .costs import CostModel, cost_model_from_json, load_cost_model, load_latency_table
from .errors import CascadeError, TraceFormatError, UpstreamError, ValidationError
from .gateway import (
    GatewayCore,
    HttpBackend,
    build_gateway_app,
    gateway_config_from_json,
    load_gateway_config,
    replay_core,
)
from .manifest import write_manifest
from .trace import MetricSpec, load_trace, write_trace

EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_UPSTREAM = 5

DEFAULT_SEED = 0


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValidationError, TraceFormatError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except UpstreamError as exc:
            click.echo(f"upstream error: {exc}", err=True)
            sys.exit(EXIT_UPSTREAM)
        except OSError as exc:
            click.echo(f"i/o error: {exc}", err=True)
            sys.exit(EXIT_IO)
        except CascadeError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)

    return wrapper


def _load_inputs(trace_path: str, metric_id: str | None, cost_path: str | None):
    trace = load_trace(trace_path, None)
    metric_id = metric_id or trace.meta.metric
    if metric_id is None:
        raise ValidationError("no --metric given and the trace header names none")
    metric = MetricSpec.parse(metric_id)
    trace.validate_metric(metric)
    cost = load_cost_model(cost_path) if cost_path else None
    return trace, metric, cost


def _default_cost() -> CostModel:
    # unit-ish synthetic costs: tier-2 an order of magnitude slower
    return cost_model_from_json(
        {
            "tier1": {"kind": "constant", "seconds_per_instance": 0.001},
            "tier2": {"kind": "constant", "seconds_per_instance": 0.01},
        }
    )


def _dump_json(obj: dict, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@click.group()
@click.version_option(__version__, message=f"cascade {__version__} (trace format v{TRACE_FORMAT_VERSION})")
def main() -> None:
    """Trace-driven evaluation of confidence-gated two-tier cascades."""


@main.command()
@click.option("--trace", "trace_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--metric", "metric_id", default=None, help="accuracy | f1:<pos_label> | mcc | mean_score")
@click.option("--cost", "cost_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="cost model JSON; defaults to a synthetic constant model")
@click.option("--policy", type=click.Choice(["threshold", "random", "oracle", "all"]), default="threshold")
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@click.option("--seeds", "num_seeds", type=int, default=curve.DEFAULT_RANDOM_SEEDS, show_default=True,
              help="seed count for the random-policy average")
@click.option("--b1", type=int, default=1, show_default=True, help="tier-1 batch size for table costs")
@click.option("--b2", type=int, default=1, show_default=True, help="tier-2 batch size for table costs")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--plot", is_flag=True, help="render the tradeoff figure next to the tables")
@_handle_errors
def sweep(trace_path, metric_id, cost_path, policy, seed, num_seeds, b1, b2, out_dir, plot):
    """Sweep operating points and write curve table(s) plus a summary report."""
    trace, metric, cost = _load_inputs(trace_path, metric_id, cost_path)
    cost = cost or _default_cost()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    families = ["threshold", "random", "oracle"] if policy == "all" else [policy]
    seeds = [seed + j for j in range(num_seeds)]
    batch_sizes = (b1, b2)

    params = {
        "metric": metric.spec_id(),
        "policy": policy,
        "seed": seed,
        "num_seeds": num_seeds,
        "batch_sizes": list(batch_sizes),
    }
    curves = {}
    for family in families:
        points = curve.sweep(
            trace, metric, cost, family, batch_sizes=batch_sizes, seeds=seeds if family == "random" else None
        )
        curves[family] = points
        csv_path = out / f"curve_{family}.csv"
        curve.write_curve_csv(points, csv_path)
        write_manifest(csv_path, command="sweep", inputs=[trace_path], params=params, seeds=seeds)
        click.echo(f"wrote {csv_path} ({len(points)} points)")

    summary = curve.speedup_report(trace, metric, cost, [0.99, 0.98], batch_sizes=batch_sizes)
    summary["families"] = {name: len(points) for name, points in curves.items()}
    if "oracle" in curves:
        summary["oracle_exact"] = gate.oracle_is_exact(trace, metric)
    summary_path = out / "sweep_summary.json"
    _dump_json(summary, summary_path)
    write_manifest(summary_path, command="sweep", inputs=[trace_path], params=params, seeds=seeds)
    click.echo(f"wrote {summary_path}")

    if plot:
        from . import plots

        tier2_perf = metrics.evaluate(gate.route_all(trace), trace, metric)
        fig_path = out / "tradeoff.png"
        plots.tradeoff_figure(curves, fig_path, tier2_performance=tier2_perf)
        write_manifest(fig_path, command="sweep", inputs=[trace_path], params=params, seeds=seeds)
        click.echo(f"wrote {fig_path}")


@main.command()
@click.option("--trace", "trace_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--metric", "metric_id", default=None)
@click.option("--cost", "cost_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--q", "qs", type=float, multiple=True, default=(0.99, 0.98), show_default=True)
@click.option("--b1", type=int, default=1, show_default=True)
@click.option("--b2", type=int, default=1, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False),
              help="write the report JSON here as well as stdout")
@_handle_errors
def calibrate(trace_path, metric_id, cost_path, qs, b1, b2, out_path):
    """Report the best speedup meeting each quality bar (speedup@q)."""
    for q in qs:
        if not 0.0 < q <= 1.0:
            raise click.BadParameter(f"quality fraction {q} outside (0, 1]", param_hint="--q")
    trace, metric, cost = _load_inputs(trace_path, metric_id, cost_path)
    cost = cost or _default_cost()
    report = curve.speedup_report(trace, metric, cost, list(qs), batch_sizes=(b1, b2))
    text = json.dumps(report, indent=2, sort_keys=True)
    click.echo(text)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
        write_manifest(
            Path(out_path),
            command="calibrate",
            inputs=[trace_path],
            params={"qs": list(qs), "metric": metric.spec_id(), "batch_sizes": [b1, b2]},
        )


@main.command()
@click.option("--trace", "trace_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", type=float, default=None, help="confidence threshold (single run)")
@click.option("--thresholds", default=None, help="comma-separated thresholds (compare mode)")
@click.option("--cost", "cost_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--b1", type=int, default=1, show_default=True)
@click.option("--b2", type=int, default=1, show_default=True)
@click.option("--flush", type=click.Choice(["end_of_stream", "max_wait"]), default="end_of_stream",
              show_default=True)
@click.option("--max-wait", "max_wait_s", type=float, default=0.1, show_default=True)
@click.option("--compare", is_flag=True, help="compare batch-size-1 against the given batch sizes")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--plot", is_flag=True)
@_handle_errors
def simulate(trace_path, threshold, thresholds, cost_path, b1, b2, flush, max_wait_s, compare, out_dir, plot):
    """Simulate batch-accumulation execution; write the batch log and summary."""
    trace = load_trace(trace_path, None)
    cost = load_cost_model(cost_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    flush_policy = (
        batchsim.EndOfStreamOnly() if flush == "end_of_stream" else batchsim.MaxWait(max_wait_s)
    )
    config = batchsim.SimConfig(b1=b1, b2=b2, cost=cost, flush_policy=flush_policy)

    if compare:
        if not thresholds:
            raise click.BadParameter("--compare needs --thresholds", param_hint="--thresholds")
        ts = [float(x) for x in thresholds.split(",") if x.strip() != ""]
        config_b1 = batchsim.SimConfig(b1=1, b2=1, cost=cost, flush_policy=flush_policy)
        rows = batchsim.compare_batch1_vs_optimal(trace, ts, config_b1, config)
        csv_path = out / "throughput_compare.csv"
        lines = ["threshold,throughput_bs1_per_s,throughput_opt_per_s,ratio"]
        for row in rows:
            lines.append(
                f"{row.threshold:.6g},{row.throughput_bs1_per_s:.6g},"
                f"{row.throughput_opt_per_s:.6g},{row.ratio:.6g}"
            )
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        write_manifest(csv_path, command="simulate", inputs=[trace_path, cost_path],
                       params={"thresholds": ts, "b1": b1, "b2": b2, "flush": flush})
        click.echo(f"wrote {csv_path}")
        if plot:
            from . import plots

            try:
                metric = MetricSpec.parse(trace.meta.metric) if trace.meta.metric else MetricSpec("accuracy")
                perfs = [
                    metrics.evaluate(gate.route_threshold(trace, t), trace, metric) for t in ts
                ]
                fig_path = out / "throughput.png"
                plots.throughput_figure(rows, perfs, fig_path)
                write_manifest(fig_path, command="simulate", inputs=[trace_path, cost_path],
                               params={"thresholds": ts, "b1": b1, "b2": b2, "flush": flush})
                click.echo(f"wrote {fig_path}")
            except ValidationError as exc:
                click.echo(f"skipping plot (no performance axis): {exc}", err=True)
        return

    if threshold is None:
        raise click.BadParameter("--threshold is required unless --compare", param_hint="--threshold")
    result = batchsim.simulate(trace, threshold, config)
    log_path = out / "batch_log.csv"
    batchsim.write_batch_log_csv(result, log_path)
    summary = {
        "records": len(trace),
        "threshold": threshold,
        "b1": b1,
        "b2": b2,
        "flush": flush,
        "makespan_s": result.makespan_s,
        "throughput_per_s": result.throughput_per_s,
        "tier1_batches": sum(1 for ev in result.batch_log if ev.tier == 1),
        "tier2_batches": sum(1 for ev in result.batch_log if ev.tier == 2),
    }
    summary_path = out / "sim_summary.json"
    _dump_json(summary, summary_path)
    params = {"threshold": threshold, "b1": b1, "b2": b2, "flush": flush, "max_wait_s": max_wait_s}
    write_manifest(log_path, command="simulate", inputs=[trace_path, cost_path], params=params)
    write_manifest(summary_path, command="simulate", inputs=[trace_path, cost_path], params=params)
    click.echo(f"wrote {log_path}")
    click.echo(f"wrote {summary_path}")


@main.command()
@click.option("--trace", "trace_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--quantiles", "num_quantiles", type=int, default=5, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--plot", is_flag=True)
@_handle_errors
def analyze(trace_path, num_quantiles, out_path, plot):
    """Per-confidence-quantile F-T / T-F error analysis table."""
    trace = load_trace(trace_path, None)
    hm = analysis.heatmap(trace, num_quantiles)
    out = Path(out_path)
    analysis.write_heatmap_csv(hm, out)
    write_manifest(out, command="analyze", inputs=[trace_path], params={"quantiles": num_quantiles})
    click.echo(f"wrote {out}")
    if plot:
        from . import plots

        fig_path = out.with_suffix(".png")
        plots.heatmap_figure(hm, fig_path)
        write_manifest(fig_path, command="analyze", inputs=[trace_path],
                       params={"quantiles": num_quantiles})
        click.echo(f"wrote {fig_path}")


@main.command()
@click.option("--n", type=int, required=True)
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@click.option("--easy-acc", type=float, default=0.95, show_default=True)
@click.option("--hard-acc", type=float, default=0.55, show_default=True)
@click.option("--tier2-acc", type=float, default=0.92, show_default=True)
@click.option("--hard-fraction", type=float, default=0.3, show_default=True)
@click.option("--separation", type=float, default=0.6, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_handle_errors
def generate(n, seed, easy_acc, hard_acc, tier2_acc, hard_fraction, separation, out_path):
    """Generate a synthetic trace with easy/hard instance structure."""
    params = fixtures.GenParams(
        tier1_easy_acc=easy_acc,
        tier1_hard_acc=hard_acc,
        tier2_acc=tier2_acc,
        hard_fraction=hard_fraction,
        confidence_separation=separation,
    )
    trace = fixtures.generate(n, seed, params)
    write_trace(trace, out_path)
    write_manifest(Path(out_path), command="generate", inputs=[],
                   params={"n": n, **params.__dict__}, seeds=[seed])
    click.echo(f"wrote {out_path} ({n} records)")


@main.command()
@click.option("--trace", "trace_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--metric", "metric_id", default=None)
@_handle_errors
def inspect(trace_path, metric_id):
    """Validate a trace and print a JSON summary (tier-only performances)."""
    trace, metric, _ = _load_inputs(trace_path, metric_id, None)
    summary = {
        "records": len(trace),
        "metric": metric.spec_id(),
        "dataset": trace.meta.dataset,
        "tier1_model": trace.meta.tier1_model,
        "tier2_model": trace.meta.tier2_model,
        "labels": sorted(trace.label_set()),
        "tier1_performance": metrics.evaluate(gate.route_threshold(trace, 0.0), trace, metric),
        "tier2_performance": metrics.evaluate(gate.route_all(trace), trace, metric),
    }
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command("optimal-batch")
@click.option("--table", "table_path", required=True, type=click.Path(exists=True, dir_okay=False))
@_handle_errors
def optimal_batch(table_path):
    """Print the batch size minimizing per-instance latency in a latency table."""
    table = load_latency_table(table_path)
    click.echo(str(curve.optimal_batch_size(table)))


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--replay", "replay_trace", default=None, type=click.Path(exists=True, dir_okay=False),
              help="serve in-process replay backends built from this trace")
@click.option("--threshold", type=float, default=None, help="override the config threshold")
@click.option("--b1", type=int, default=None, help="override tier-1 batch size")
@click.option("--b2", type=int, default=None, help="override tier-2 batch size")
@click.option("--max-wait", "max_wait_s", type=float, default=None)
@click.option("--flush-policy", type=click.Choice(["max_wait", "end_of_stream"]), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@_handle_errors
def serve(config_path, replay_trace, threshold, b1, b2, max_wait_s, flush_policy, host, port):
    """Run the live cascade gateway (long-running; SIGINT shuts down cleanly)."""
    import uvicorn

    if config_path:
        cfg = load_gateway_config(config_path)
    elif replay_trace:
        cfg = gateway_config_from_json(
            {
                "threshold": 0.5,
                "tier1": {"endpoint": "inprocess://tier1", "batch_size": 8, "timeout_s": 5.0},
                "tier2": {"endpoint": "inprocess://tier2", "batch_size": 4, "timeout_s": 10.0},
            }
        )
    else:
        raise ValidationError("serve needs --config or --replay")

    overrides: dict = {}
    if threshold is not None:
        overrides["threshold"] = threshold
    if max_wait_s is not None:
        overrides["max_wait_s"] = max_wait_s
    if flush_policy is not None:
        overrides["flush_policy"] = flush_policy
    if b1 is not None:
        overrides["tier1"] = {"endpoint": cfg.tier1.endpoint, "batch_size": b1, "timeout_s": cfg.tier1.timeout_s}
    if b2 is not None:
        overrides["tier2"] = {"endpoint": cfg.tier2.endpoint, "batch_size": b2, "timeout_s": cfg.tier2.timeout_s}
    if overrides:
        base = {
            "threshold": cfg.threshold,
            "max_wait_s": cfg.max_wait_s,
            "flush_policy": cfg.flush_policy,
            "tier2_fallback": cfg.tier2_fallback,
            "counters_enabled": cfg.counters_enabled,
            "tier1": {"endpoint": cfg.tier1.endpoint, "batch_size": cfg.tier1.batch_size,
                      "timeout_s": cfg.tier1.timeout_s},
            "tier2": {"endpoint": cfg.tier2.endpoint, "batch_size": cfg.tier2.batch_size,
                      "timeout_s": cfg.tier2.timeout_s},
        }
        base.update(overrides)
        cfg = gateway_config_from_json(base)

    if replay_trace:
        trace = load_trace(replay_trace, None)
        core = replay_core(trace, cfg)
    else:
        core = GatewayCore(
            cfg,
            HttpBackend(cfg.tier1.endpoint, cfg.tier1.timeout_s),
            HttpBackend(cfg.tier2.endpoint, cfg.tier2.timeout_s),
        )
    app = build_gateway_app(core)
    click.echo(f"gateway listening on {host}:{port} (threshold {cfg.threshold})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
