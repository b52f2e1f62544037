"""Command-line front end.

Exit codes: 0 on success, 1 on user error (bad flags, invalid inputs,
missing files), 2 on data corruption (unreadable container or stream files).
All error output is a single structured line on standard error.
"""

from __future__ import annotations

import os
import sys

import click
import numpy as np

from . import analysis, bench, codec, containers, model, pipeline, thermal
from .backend import BACKEND_NAME, available_backends
from .errors import CorruptStreamError, WhffError

# published per-field throughput targets, printed beside computed values
FLOP_TARGETS_GFLOPS = {"paper-fast": 398.7, "paper-slow": 587.2}


@click.group()
def cli():
    """Wafer-heat feed-forward pipeline tools."""


def _parse_grid(text):
    try:
        r, c = text.lower().split("x")
        return int(r), int(c)
    except ValueError:
        raise WhffError(f"grid must look like 32x32, got {text!r}") from None


def _codec_mode(mode, bpv, planes, tolerance):
    if mode == "rate":
        if bpv is None:
            raise WhffError("mode rate requires --bpv")
        return codec.FixedRate(bpv)
    if mode == "precision":
        if planes is None:
            raise WhffError("mode precision requires --planes")
        return codec.FixedPrecision(planes)
    if mode == "accuracy":
        if tolerance is None:
            raise WhffError("mode accuracy requires --tolerance")
        return codec.FixedAccuracy(tolerance)
    raise WhffError(f"unknown codec mode {mode!r}")


def _emit(text, out):
    if out is None:
        click.echo(text, nl=False)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--grid", required=True, help="thermal grid, e.g. 32x32")
@click.option("--S", "s_dim", required=True, type=int,
              help="interpolation sample count S")
@click.option("--K", "k_dim", required=True, type=int,
              help="deformation operator rows K")
@click.option("--M", "m_dim", required=True, type=int,
              help="slit rows M")
@click.option("--nnz", default=5, type=int, show_default=True,
              help="target nonzeros per row of the propagation operator")
@click.option("--fields", default=None, type=int, help="number of fields")
@click.option("--c-scale", default=1e-8, type=float, show_default=True)
@click.option("--c-kind", default="smooth",
              type=click.Choice(["smooth", "noise"]), show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--out", default="model", show_default=True,
              help="output directory")
def gen(grid, s_dim, k_dim, m_dim, nnz, fields, c_scale, c_kind, seed, out):
    """Generate a synthetic wafer model and write it to disk."""
    rows, cols = _parse_grid(grid)
    spec = model.ModelSpec(grid_rows=rows, grid_cols=cols, S=s_dim, K=k_dim,
                           M=m_dim, nnz_target=nnz, seed=seed,
                           n_fields=fields, c_scale=c_scale, c_kind=c_kind)
    m = model.generate_model(spec)
    model.save_model(m, out)
    click.echo(f"model written to {out} (T={m.T}, S={m.S}, K={spec.K}, "
               f"M={spec.M}, fields={m.n_fields})")


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--model", "model_dir", required=True,
              help="model directory from gen")
@click.option("--scan", default="fast", type=click.Choice(["fast", "slow"]),
              show_default=True)
@click.option("--fields", default=None, type=int,
              help="number of fields to scan (default: all in the model)")
@click.option("--t-l", default=None, type=int, help="light ms per field")
@click.option("--t-d", default=None, type=int, help="dark ms per field")
@click.option("--budget-ms", default=None, type=float,
              help="delivery budget per field")
@click.option("--compress/--no-compress", default=False, show_default=True)
@click.option("--mode", default="accuracy",
              type=click.Choice(["rate", "precision", "accuracy"]),
              show_default=True)
@click.option("--bpv", default=None, type=int)
@click.option("--planes", default=None, type=int)
@click.option("--tolerance", default=1e-12, type=float, show_default=True)
@click.option("--bandwidth", default=16e9, type=float, show_default=True,
              help="interconnect bytes/s")
@click.option("--decode-throughput", default=33e9, type=float,
              show_default=True)
@click.option("--queue-depth", default=2, type=int, show_default=True)
@click.option("--threads", default=1, type=int, show_default=True,
              help="per-axis compute workers (1..3)")
@click.option("--time-source", default="simulated",
              type=click.Choice(["simulated", "real"]), show_default=True)
@click.option("--seed", default=0, type=int, show_default=True,
              help="heat load seed")
@click.option("--out", default="run", show_default=True,
              help="output directory")
def run(model_dir, scan, fields, t_l, t_d, budget_ms, compress, mode, bpv,
        planes, tolerance, bandwidth, decode_throughput, queue_depth,
        threads, time_source, seed, out):
    """Execute a scan and write trace, deformations and deadline summary."""
    m = model.load_model(model_dir)
    m.validate()
    n_fields = m.n_fields if fields is None else fields
    sched = model.build_scan_schedule(scan, n_fields, t_l=t_l, t_d=t_d,
                                      budget_ms=budget_ms)
    load = thermal.synthetic_heatload(m, seed=seed)
    cfg = pipeline.PipelineConfig(
        interconnect_bandwidth=bandwidth, use_compression=compress,
        codec_mode=_codec_mode(mode, bpv, planes, tolerance),
        decode_throughput=decode_throughput, queue_depth=queue_depth,
        axis_workers=threads, time_source=time_source)
    result = pipeline.run_scan(m, sched, load, cfg)
    os.makedirs(out, exist_ok=True)
    pipeline.export_trace_csv(result.trace, os.path.join(out, "trace.csv"))
    for axis in model.AXES:
        containers.write_dense(os.path.join(out, f"deformation_{axis}.whfm"),
                               result.deformations[axis])
    report = pipeline.deadline_report(result.trace)
    misses = sum(1 for _, met, _ in report.verdicts if not met)
    click.echo(f"fields={len(report.verdicts)} deadline_misses={misses} "
               f"miss_rate={report.miss_rate:.4f} "
               f"worst_latency_s={report.worst_latency_s:.6f}")
    for field_id, met, lat in report.verdicts:
        click.echo(f"field {field_id}: latency_s={lat:.6f} "
                   f"deadline_met={str(met).lower()}")


# ---------------------------------------------------------------------------
# bench-gemv
# ---------------------------------------------------------------------------

@cli.command("bench-gemv")
@click.option("--shape", "shapes", multiple=True,
              type=click.Choice(sorted(bench.BENCH_SHAPES)),
              help="repeatable; default all")
@click.option("--policy", "policies", multiple=True,
              type=click.Choice(["mixed", "single", "double"]),
              help="repeatable; default all")
@click.option("--backend", "backends", multiple=True,
              help="repeatable; default all available")
@click.option("--reps", default=5, type=int, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--out", default=None, help="write CSV here instead of stdout")
def bench_gemv_cmd(shapes, policies, backends, reps, seed, out):
    """Benchmark the dense kernel; reports measured GFLOP/s per variant."""
    shape_map = {k: bench.BENCH_SHAPES[k] for k in (shapes or bench.BENCH_SHAPES)}
    for b in backends:
        if b not in available_backends():
            raise WhffError(f"backend {b!r} not available "
                            f"(have {sorted(available_backends())})")
    rows = bench.bench_gemv(
        shapes=shape_map,
        policies=policies or ("mixed", "single", "double"),
        backends=list(backends) or None, repetitions=reps, seed=seed)
    _emit(bench.gemv_rows_to_csv(rows), out)


@cli.command("bench-codec")
@click.option("--reps", default=3, type=int, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--out", default=None, help="write CSV here instead of stdout")
def bench_codec_cmd(reps, seed, out):
    """Benchmark compression and decode throughput per backend."""
    rows = bench.bench_codec(repetitions=reps, seed=seed)
    _emit(bench.codec_rows_to_csv(rows), out)


# ---------------------------------------------------------------------------
# codec
# ---------------------------------------------------------------------------

@cli.group("codec")
def codec_group():
    """Compress, decompress and inspect dense matrices."""


@codec_group.command("compress")
@click.argument("src")
@click.argument("dst")
@click.option("--mode", required=True,
              type=click.Choice(["rate", "precision", "accuracy"]))
@click.option("--bpv", default=None, type=int)
@click.option("--planes", default=None, type=int)
@click.option("--tolerance", default=None, type=float)
def codec_compress(src, dst, mode, bpv, planes, tolerance):
    """Compress a dense matrix container into a stream file."""
    arr = containers.read_dense(src)
    stream = codec.compress(arr, _codec_mode(mode, bpv, planes, tolerance))
    codec.save_stream(dst, stream)
    click.echo(f"compressed {src} -> {dst} "
               f"({arr.nbytes} -> {stream.payload.size} payload bytes)")


@codec_group.command("decompress")
@click.argument("src")
@click.argument("dst")
def codec_decompress(src, dst):
    """Decompress a stream file into a dense matrix container."""
    stream = codec.load_stream(src)
    containers.write_dense(dst, codec.decompress(stream))
    click.echo(f"decompressed {src} -> {dst}")


@codec_group.command("stats")
@click.argument("stream_path")
@click.option("--original", default=None,
              help="dense container to compute error metrics against")
def codec_stats(stream_path, original):
    """Report per-stream size and, with --original, error metrics."""
    stream = codec.load_stream(stream_path)
    decoded = codec.decompress(stream)
    if original is not None:
        ref = containers.read_dense(original)
        metrics = codec.codec_metrics(ref, decoded, stream)
    else:
        metrics = codec.codec_metrics(decoded, decoded, stream)
    click.echo(f"mode={type(stream.mode).__name__} rows={stream.rows} "
               f"cols={stream.cols} blocks={stream.n_blocks}")
    for key, val in metrics.as_dict().items():
        if original is None and key in ("rmse", "nrmse",
                                        "max_pointwise_error", "psnr"):
            continue
        click.echo(f"{key}={val!r}")


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _params_from_flags(preset, t, s, m, nnz_a, nnz_b, t_l, t_d, budget_ms):
    if preset is not None:
        return analysis.PRESETS[preset]
    required = dict(T=t, S=s, M=m, t_l=t_l, t_d=t_d, budget_ms=budget_ms)
    missing = [k for k, v in required.items() if v is None]
    if missing:
        raise WhffError(f"missing flags without --preset: {missing}")
    return analysis.CostParams(T=t, S=s, M=m, nnz_A=nnz_a, nnz_B=nnz_b,
                               t_l=t_l, t_d=t_d, budget_ms=budget_ms)


def _param_options(fn):
    opts = [
        click.option("--preset", default=None,
                     type=click.Choice(sorted(analysis.PRESETS))),
        click.option("--t", default=None, type=int),
        click.option("--s", default=None, type=int),
        click.option("--m", default=None, type=int),
        click.option("--nnz-a", default=7, type=int, show_default=True),
        click.option("--nnz-b", default=1, type=int, show_default=True),
        click.option("--t-l", default=None, type=int),
        click.option("--t-d", default=None, type=int),
        click.option("--budget-ms", default=None, type=float),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@cli.group("analyze")
def analyze_group():
    """Closed-form cost models and roofline reports."""


@analyze_group.command("flops")
@_param_options
@click.option("--deformation-steps", default="as-printed",
              type=click.Choice(list(analysis.DEFORMATION_STEP_MODES)),
              show_default=True)
def analyze_flops(preset, t, s, m, nnz_a, nnz_b, t_l, t_d, budget_ms,
                  deformation_steps):
    """Per-field FLOP cost and required GFLOP/s."""
    p = _params_from_flags(preset, t, s, m, nnz_a, nnz_b, t_l, t_d, budget_ms)
    for mode in ("light", "as-printed"):
        r = analysis.flop_cost(p, mode)
        marker = " *" if mode == deformation_steps else ""
        line = (f"deformation_steps={mode}{marker} "
                f"total_flop={r['total_flop']} "
                f"gflops_required={r['gflops_required']:.1f} "
                f"per_axis_gflops={r['gflops_required'] / 3:.1f}")
        if preset in FLOP_TARGETS_GFLOPS:
            line += f" target_gflops={FLOP_TARGETS_GFLOPS[preset]}"
        click.echo(line)


@analyze_group.command("io")
@_param_options
def analyze_io(preset, t, s, m, nnz_a, nnz_b, t_l, t_d, budget_ms):
    """Per-field I/O operation count and implied bandwidth."""
    p = _params_from_flags(preset, t, s, m, nnz_a, nnz_b, t_l, t_d, budget_ms)
    parts = analysis.io_cost_breakdown(p)
    click.echo(f"io_ops_total={parts['total']} thermal={parts['thermal']} "
               f"deformation={parts['deformation']}")
    click.echo(f"bytes_per_s_total={analysis.io_bytes_per_s(p):.4e}")
    deform_bps = parts["deformation"] * 4 / (p.budget_ms * 1e-3)
    click.echo(f"deformation_bytes_per_s_per_axis={deform_bps / 3:.4e}")


@analyze_group.command("roofline")
@click.option("--platforms", "platforms_path", default=None,
              help="JSON platform file; default: bundled samples")
@click.option("--ai", "ais", multiple=True, type=float,
              help="arithmetic intensity, repeatable; default 1/6 and 1/2")
@click.option("--out", default=None, help="write CSV here instead of stdout")
def analyze_roofline(platforms_path, ais, out):
    """Attainable and price-normalized FLOP/s per platform."""
    platforms = analysis.load_platforms(platforms_path)
    ais = list(ais) or [1 / 6, 1 / 2]
    lines = ["platform,ai,attainable_flops,normalized_flops_per_usd,"
             "ridge_point"]
    for pl in platforms:
        for ai in ais:
            att = analysis.roofline_attainable(pl, ai)
            lines.append(f"{pl.name},{ai!r},{att!r},"
                         f"{analysis.normalized_roofline(pl, ai)!r},"
                         f"{analysis.ridge_point(pl)!r}")
    _emit("\n".join(lines) + "\n", out)


@analyze_group.command("pipeline")
@click.option("--t-transfer", required=True, type=float,
              help="uncompressed transfer time per item")
@click.option("--t-compute", required=True, type=float)
@click.option("--t-decode", required=True, type=float)
@click.option("--r", "ratio", required=True, type=float,
              help="compression factor (>= 1)")
def analyze_pipeline(t_transfer, t_compute, t_decode, ratio):
    """Steady-state period and latency with and without compression."""
    for compressed in (False, True):
        period = pipeline.pipeline_period(t_transfer, t_compute, t_decode,
                                          ratio, compressed)
        latency = pipeline.pipeline_latency(t_transfer, t_compute, t_decode,
                                            ratio, compressed)
        tag = "compressed" if compressed else "uncompressed"
        click.echo(f"{tag} period={period!r} latency={latency!r}")
    lat_u = pipeline.pipeline_latency(t_transfer, t_compute, t_decode,
                                      ratio, False)
    lat_c = pipeline.pipeline_latency(t_transfer, t_compute, t_decode,
                                      ratio, True)
    click.echo(f"latency_reduction_pct={100 * (1 - lat_c / lat_u):.3f}")


@cli.command("backends")
def backends_cmd():
    """List kernel backends; the first is the active default."""
    click.echo(f"active={BACKEND_NAME} "
               f"available={','.join(sorted(available_backends()))}")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("whff: error: aborted", err=True)
        return 1
    except click.ClickException as exc:
        click.echo(f"whff: error: usage: {exc.format_message()}", err=True)
        return 1
    except CorruptStreamError as exc:
        click.echo(f"whff: error: corrupt-data: {exc}", err=True)
        return 2
    except WhffError as exc:
        click.echo(f"whff: error: {type(exc).__name__}: {exc}", err=True)
        return 1
    except FileNotFoundError as exc:
        click.echo(f"whff: error: missing-file: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
