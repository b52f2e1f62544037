"""Measured throughput benchmarks for the dense kernels and the codec.

Numbers here are measured and reported, never asserted: sustained GFLOP/s
depends on the host. FLOPs are counted as 2 per (multiply, add) pair, so a
single row of width S costs 2S-1.
"""

from __future__ import annotations

import io
import time
from dataclasses import dataclass

import numpy as np

from . import codec as codec_mod
from .backend import available_backends
from .mpgemv import GemvRequest, gemv, gemv_oracle, relative_error

# (name, rows, cols): wide mirrors the slit product scaled down
BENCH_SHAPES = {
    "wide": (378, 16384),
    "tall": (4096, 512),
    "square": (1024, 1024),
}


@dataclass
class GemvBenchRow:
    shape: str
    policy: str
    backend: str
    repetitions: int
    seconds_min: float
    seconds_median: float
    gflops: float
    max_rel_err: float


def _timeit(fn, repetitions):
    samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return min(samples), float(np.median(samples))


def bench_gemv(shapes=None, policies=("mixed", "single", "double"),
               backends=None, repetitions=5, seed=0):
    """Time the dense kernel across shapes, policies and backends."""
    if shapes is None:
        shapes = BENCH_SHAPES
    if backends is None:
        backends = available_backends()
    rng = np.random.default_rng(seed)
    rows = []
    for shape_name, (m, n) in shapes.items():
        mat = rng.standard_normal((m, n)).astype(np.float32)
        vec = rng.standard_normal(n).astype(np.float32)
        ref = gemv_oracle(mat, vec)
        flop = m * (2 * n - 1)
        for policy in policies:
            req = GemvRequest(mat, vec, policy, "sequential")
            for backend in backends:
                result = gemv(req, backend=backend)
                err = float(relative_error(result, ref).max())
                t_min, t_med = _timeit(lambda: gemv(req, backend=backend),
                                       repetitions)
                rows.append(GemvBenchRow(
                    shape=f"{m}x{n}", policy=policy, backend=backend,
                    repetitions=repetitions, seconds_min=t_min,
                    seconds_median=t_med, gflops=flop / t_min / 1e9,
                    max_rel_err=err))
    return rows


GEMV_CSV_HEADER = ("shape,policy,backend,repetitions,seconds_min,"
                   "seconds_median,gflops,max_rel_err")


def gemv_rows_to_csv(rows):
    buf = io.StringIO()
    buf.write(GEMV_CSV_HEADER + "\n")
    for r in rows:
        buf.write(f"{r.shape},{r.policy},{r.backend},{r.repetitions},"
                  f"{r.seconds_min!r},{r.seconds_median!r},{r.gflops!r},"
                  f"{r.max_rel_err!r}\n")
    return buf.getvalue()


@dataclass
class CodecBenchRow:
    mode: str
    backend: str
    shape: str
    compress_s: float
    decompress_s: float
    decode_bytes_per_s: float
    bits_per_value: float


def bench_codec(shape=(512, 512), backends=None, repetitions=3, seed=0):
    """Time compression and decode throughput of decoded output bytes."""
    if backends is None:
        backends = available_backends()
    rng = np.random.default_rng(seed)
    x = np.arange(shape[1]) / shape[1]
    y = np.arange(shape[0]) / shape[0]
    arr = (np.exp(-((x[None, :] - 0.5) ** 2 + (y[:, None] - 0.5) ** 2) * 8)
           + 0.01 * rng.standard_normal(shape)).astype(np.float32)
    modes = [("rate-8", codec_mod.FixedRate(8)),
             ("precision-16", codec_mod.FixedPrecision(16)),
             ("accuracy-1e-6", codec_mod.FixedAccuracy(1e-6))]
    rows = []
    for mode_name, mode in modes:
        for backend in backends:
            stream = codec_mod.compress(arr, mode, backend=backend)
            c_min, _ = _timeit(
                lambda: codec_mod.compress(arr, mode, backend=backend),
                repetitions)
            d_min, _ = _timeit(
                lambda: codec_mod.decompress(stream, backend=backend),
                repetitions)
            metrics = codec_mod.codec_metrics(
                arr, codec_mod.decompress(stream, backend=backend), stream)
            rows.append(CodecBenchRow(
                mode=mode_name, backend=backend,
                shape=f"{shape[0]}x{shape[1]}",
                compress_s=c_min, decompress_s=d_min,
                decode_bytes_per_s=arr.nbytes / d_min,
                bits_per_value=metrics.bits_per_value))
    return rows


CODEC_CSV_HEADER = ("mode,backend,shape,compress_s,decompress_s,"
                    "decode_bytes_per_s,bits_per_value")


def codec_rows_to_csv(rows):
    buf = io.StringIO()
    buf.write(CODEC_CSV_HEADER + "\n")
    for r in rows:
        buf.write(f"{r.mode},{r.backend},{r.shape},{r.compress_s!r},"
                  f"{r.decompress_s!r},{r.decode_bytes_per_s!r},"
                  f"{r.bits_per_value!r}\n")
    return buf.getvalue()
