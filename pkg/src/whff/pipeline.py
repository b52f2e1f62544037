"""Two-stage transfer/decode || compute pipeline with firm-deadline accounting.

Stage 1 fetches (and, when compression is on, decodes) the per-slit
sub-matrices; stage 2 advances the thermal state each millisecond and, on
light steps, evaluates the per-axis deformation products. Deadline misses are
recorded, never fatal. Values are computed independently of timing, so
pipelining affects the trace but never the deformations.
"""

from __future__ import annotations

import queue as queue_mod
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import codec as codec_mod
from . import thermal
from .errors import WhffError
from .model import AXES
from .mpgemv import GemvRequest, gemv


@dataclass
class PipelineConfig:
    interconnect_bandwidth: float = 16e9       # bytes/s
    use_compression: bool = False
    codec_mode: object = None                  # default FixedAccuracy(1e-12)
    decode_throughput: float = 33e9            # W_c, bytes/s of decoded output
    queue_depth: int = 2
    axis_workers: int = 1
    time_source: str = "simulated"             # "simulated" | "real"
    compute_flops_per_s: float = 50e9
    transfer_time_override: float = None       # seconds per light step
    compute_time_override: float = None        # seconds per schedule step
    decode_time_override: float = None         # seconds per light step
    decode_stall_s: dict = field(default_factory=dict)  # field_id -> extra s

    def __post_init__(self):
        if self.interconnect_bandwidth <= 0:
            raise WhffError("interconnect bandwidth must be positive")
        if self.queue_depth < 2:
            raise WhffError("queue_depth must be >= 2 (double buffering)")
        if not (1 <= self.axis_workers <= 3):
            raise WhffError("axis_workers must be in 1..3")
        if self.time_source not in ("simulated", "real"):
            raise WhffError(f"unknown time source {self.time_source!r}")
        if self.codec_mode is None:
            self.codec_mode = codec_mod.FixedAccuracy(1e-12)


@dataclass
class StepRecord:
    field_id: int
    k: int
    phase: str
    slit: int                      # -1 for dark steps
    bytes_in: int
    t_transfer: float
    t_decode: float
    t_compute: float
    stage1_start: float
    stage1_end: float
    stage2_start: float
    stage2_end: float


@dataclass
class FieldRecord:
    field_id: int
    start: float
    end: float
    latency_s: float
    budget_s: float
    deadline_met: bool


@dataclass
class PipelineTrace:
    steps: list
    fields: list


@dataclass
class ScanResult:
    deformations: dict             # axis -> (n_light_total, M) float32
    trace: PipelineTrace


@dataclass
class DeadlineReport:
    verdicts: list                 # [(field_id, deadline_met, latency_s)]
    miss_rate: float
    worst_latency_s: float


# ---------------------------------------------------------------------------
# Table-1 period/latency algebra
# ---------------------------------------------------------------------------

def pipeline_period(t_transfer, t_compute, t_decode, r, compressed):
    _check_table1(t_transfer, t_compute, t_decode, r)
    if compressed:
        return max(t_transfer / r, t_compute + t_decode)
    return max(t_transfer, t_compute)


def pipeline_latency(t_transfer, t_compute, t_decode, r, compressed):
    _check_table1(t_transfer, t_compute, t_decode, r)
    if compressed:
        return t_compute + t_transfer / r + t_decode
    return t_compute + t_transfer


def _check_table1(t_transfer, t_compute, t_decode, r):
    if min(t_transfer, t_compute, t_decode) < 0:
        raise WhffError("stage times must be nonnegative")
    if r < 1:
        raise WhffError(f"compression factor must be >= 1, got {r}")


# ---------------------------------------------------------------------------
# scan execution
# ---------------------------------------------------------------------------

def _prepare_slits(model, cfg):
    """Per (field, slit): matrices to compute with and the bytes moved.

    With compression the slit sub-matrices are compressed offline and the
    compute path uses the decoded values; bytes_in is the actual stream size.
    """
    prepared = {}
    for f in range(model.n_fields):
        for s in range(model.n_slits(f)):
            mats = {}
            nbytes = 0
            raw_bytes = 0
            for axis in AXES:
                c_field = model.fetch_field_submatrix(axis, f)
                c_slit = model.fetch_slit_submatrix(c_field, f, s)
                raw_bytes += c_slit.nbytes
                if cfg.use_compression:
                    stream = codec_mod.compress(c_slit, cfg.codec_mode)
                    mats[axis] = codec_mod.decompress(stream)
                    nbytes += int(stream.payload.size)
                else:
                    mats[axis] = c_slit
                    nbytes += c_slit.nbytes
            prepared[(f, s)] = (mats, nbytes, raw_bytes)
    return prepared


def _step_compute_flops(model, light):
    t_flops = 2 * model.A.nnz + 2 * model.T        # sparse update + diag input
    p_flops = 2 * model.P.nnz
    flops = t_flops + p_flops
    if light:
        flops += 3 * model.spec.M * (2 * model.S - 1)
    return flops


def run_scan(model, schedule, heatload, cfg, resampler=None, backend=None):
    """Execute the full scan; returns deformations per axis and a trace.

    resampler: optional deformation interpolation hook, called per axis per
    light step with the raw (M,) deformation vector; defaults to identity.
    """
    if len(schedule.fields) > model.n_fields:
        raise WhffError(
            f"schedule has {len(schedule.fields)} fields, model only "
            f"{model.n_fields}")
    if resampler is None:
        resampler = lambda axis, delta: delta
    prepared = _prepare_slits(model, cfg)
    if cfg.time_source == "real":
        return _run_real(model, schedule, heatload, cfg, prepared, resampler,
                         backend)
    return _run_simulated(model, schedule, heatload, cfg, prepared, resampler,
                          backend)


def _stage1_times(cfg, field_id, nbytes, raw_bytes):
    if cfg.transfer_time_override is not None:
        t_transfer = cfg.transfer_time_override
    else:
        t_transfer = nbytes / cfg.interconnect_bandwidth
    if cfg.decode_time_override is not None:
        t_decode = cfg.decode_time_override
    elif cfg.use_compression:
        t_decode = raw_bytes / cfg.decode_throughput
    else:
        t_decode = 0.0
    t_decode += cfg.decode_stall_s.get(field_id, 0.0)
    return t_transfer, t_decode


def _compute_deltas(mats, s_next, backend, resampler):
    out = {}
    for axis in AXES:
        delta = gemv(GemvRequest(mats[axis], s_next, "mixed", "sequential"),
                     backend=backend)
        out[axis] = np.asarray(resampler(axis, delta), dtype=np.float32)
    return out


def _run_simulated(model, schedule, heatload, cfg, prepared, resampler,
                   backend):
    deformations = {axis: [] for axis in AXES}
    steps = []
    fields = []
    state = thermal.ThermalState.initial(model)

    # producer bookkeeping over light-step items
    item_infos = []                 # (field_id, slit, nbytes, t_transfer, t_decode)
    p_finish = []                   # producer finish time per item
    c_start = []                    # consumer pickup time per item
    last_p_finish = 0.0
    produced = 0
    c_time = 0.0

    def produce_through(i):
        nonlocal produced, last_p_finish
        while produced <= i:
            f_id, slit, nbytes, t_tr, t_dec = item_infos[produced]
            start = last_p_finish
            if produced >= cfg.queue_depth:
                # bounded queue: cannot run more than queue_depth ahead
                start = max(start, c_start[produced - cfg.queue_depth])
            last_p_finish = start + t_tr + t_dec
            p_finish.append((start, last_p_finish))
            produced += 1

    # enumerate all items first (deterministic, timing-independent)
    for fs in schedule.fields:
        n_slits = model.n_slits(fs.field_id)
        for i in range(fs.t_l):
            slit = fs.slit_for_light_step(i, n_slits)
            mats, nbytes, raw_bytes = prepared[(fs.field_id, slit)]
            t_tr, t_dec = _stage1_times(cfg, fs.field_id, nbytes, raw_bytes)
            item_infos.append((fs.field_id, slit, nbytes, t_tr, t_dec))

    item = 0
    for fs in schedule.fields:
        field_start = c_time
        last_delivery = c_time
        for k, phase, slit, s_next in thermal.run_field_thermal(
                model, fs, heatload, state):
            if cfg.compute_time_override is not None:
                t_comp = cfg.compute_time_override
            else:
                t_comp = (_step_compute_flops(model, phase == "light")
                          / cfg.compute_flops_per_s)
                if phase == "light":
                    t_comp /= min(cfg.axis_workers, 3)
            if phase == "light":
                produce_through(item)
                mats, nbytes, _ = prepared[(fs.field_id, slit)]
                s1_start, s1_end = p_finish[item]
                stage2_start = max(c_time, s1_end)
                c_start.append(stage2_start)
                stage2_end = stage2_start + t_comp
                deltas = _compute_deltas(mats, s_next, backend, resampler)
                for axis in AXES:
                    deformations[axis].append(deltas[axis])
                t_tr, t_dec = item_infos[item][3], item_infos[item][4]
                steps.append(StepRecord(
                    fs.field_id, k, phase, slit, nbytes, t_tr, t_dec, t_comp,
                    s1_start, s1_end, stage2_start, stage2_end))
                last_delivery = stage2_end
                item += 1
            else:
                stage2_start = c_time
                stage2_end = c_time + t_comp
                steps.append(StepRecord(
                    fs.field_id, k, phase, -1, 0, 0.0, 0.0, t_comp,
                    stage2_start, stage2_start, stage2_start, stage2_end))
            c_time = stage2_end
        latency = last_delivery - field_start
        budget = fs.time_budget_ms / 1e3
        fields.append(FieldRecord(fs.field_id, field_start, c_time, latency,
                                  budget, latency <= budget))

    result = {axis: np.vstack(vals) if vals else np.zeros((0, model.spec.M),
                                                          dtype=np.float32)
              for axis, vals in deformations.items()}
    return ScanResult(deformations=result,
                      trace=PipelineTrace(steps=steps, fields=fields))


def _run_real(model, schedule, heatload, cfg, prepared, resampler, backend):
    """Wall-clock variant: a producer thread feeds a bounded queue."""
    deformations = {axis: [] for axis in AXES}
    steps = []
    fields = []
    state = thermal.ThermalState.initial(model)
    q = queue_mod.Queue(maxsize=cfg.queue_depth)
    t0 = time.perf_counter()

    def producer():
        for fs in schedule.fields:
            n_slits = model.n_slits(fs.field_id)
            for i in range(fs.t_l):
                slit = fs.slit_for_light_step(i, n_slits)
                start = time.perf_counter() - t0
                mats, nbytes, _ = prepared[(fs.field_id, slit)]
                end = time.perf_counter() - t0
                q.put((fs.field_id, slit, mats, nbytes, start, end))

    th = threading.Thread(target=producer, daemon=True)
    th.start()
    for fs in schedule.fields:
        field_start = time.perf_counter() - t0
        last_delivery = field_start
        for k, phase, slit, s_next in thermal.run_field_thermal(
                model, fs, heatload, state):
            if phase == "light":
                f_id, s_id, mats, nbytes, s1_start, s1_end = q.get()
                stage2_start = time.perf_counter() - t0
                deltas = _compute_deltas(mats, s_next, backend, resampler)
                for axis in AXES:
                    deformations[axis].append(deltas[axis])
                stage2_end = time.perf_counter() - t0
                steps.append(StepRecord(
                    fs.field_id, k, phase, slit, nbytes,
                    s1_end - s1_start, 0.0, stage2_end - stage2_start,
                    s1_start, s1_end, stage2_start, stage2_end))
                last_delivery = stage2_end
            else:
                stage2_start = time.perf_counter() - t0
                stage2_end = time.perf_counter() - t0
                steps.append(StepRecord(
                    fs.field_id, k, phase, -1, 0, 0.0, 0.0,
                    stage2_end - stage2_start, stage2_start, stage2_start,
                    stage2_start, stage2_end))
            last_delivery = max(last_delivery, stage2_end)
        end = time.perf_counter() - t0
        latency = last_delivery - field_start
        budget = fs.time_budget_ms / 1e3
        fields.append(FieldRecord(fs.field_id, field_start, end, latency,
                                  budget, latency <= budget))
    th.join()
    result = {axis: np.vstack(vals) if vals else np.zeros((0, model.spec.M),
                                                          dtype=np.float32)
              for axis, vals in deformations.items()}
    return ScanResult(deformations=result,
                      trace=PipelineTrace(steps=steps, fields=fields))


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------

def deadline_report(trace, budgets=None):
    """Aggregate per-field verdicts; optionally re-judge with new budgets."""
    verdicts = []
    for fr in trace.fields:
        budget = fr.budget_s if budgets is None else budgets[fr.field_id]
        met = fr.latency_s <= budget
        verdicts.append((fr.field_id, met, fr.latency_s))
    misses = sum(1 for _, met, _ in verdicts if not met)
    miss_rate = misses / len(verdicts) if verdicts else 0.0
    worst = max((lat for _, _, lat in verdicts), default=0.0)
    return DeadlineReport(verdicts=verdicts, miss_rate=miss_rate,
                          worst_latency_s=worst)


TRACE_HEADER = ("field,k,phase,slit,bytes_in,t_transfer_s,t_decode_s,"
                "t_compute_s,latency_s,deadline_met")


def export_trace_csv(trace, path):
    by_field = {fr.field_id: fr for fr in trace.fields}
    with open(path, "w", newline="") as fh:
        fh.write(TRACE_HEADER + "\n")
        for s in trace.steps:
            fr = by_field[s.field_id]
            fh.write(f"{s.field_id},{s.k},{s.phase},{s.slit},{s.bytes_in},"
                     f"{s.t_transfer!r},{s.t_decode!r},{s.t_compute!r},"
                     f"{fr.latency_s!r},{str(fr.deadline_met).lower()}\n")
