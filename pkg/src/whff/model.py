"""Synthetic wafer model generation, windows, schedules and persistence.

Generated models carry the structure the downstream stages rely on: a sparse
diagonally dominant thermal propagation operator, a diagonal input scaling
operator, a partition-of-unity interpolation operator, and per-axis dense
deformation operators built from smooth spatial response kernels so that
block compression behaves as it would on a physical response matrix.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse as sp

from . import containers
from .errors import (ModelTooLargeError, ScheduleError, WhffError,
                     WindowLookupError)

AXES = ("x", "y", "z")

# stencil neighbor offsets, in the order they are granted as nnz_target grows
_NEIGHBOR_OFFSETS = [(-1, 0), (1, 0), (0, -1), (0, 1),
                     (-1, -1), (1, 1), (-1, 1), (1, -1),
                     (-2, 0), (2, 0), (0, -2), (0, 2)]

DEFAULT_MEM_CAP_BYTES = 512 * 1024 * 1024


@dataclass(frozen=True)
class ModelSpec:
    grid_rows: int
    grid_cols: int
    S: int
    K: int
    M: int
    nnz_target: int = 5
    seed: int = 0
    n_fields: int | None = None
    c_scale: float = 1e-8
    c_kind: str = "smooth"          # "smooth" | "noise"
    mem_cap_bytes: int = DEFAULT_MEM_CAP_BYTES

    @property
    def T(self):
        return self.grid_rows * self.grid_cols


@dataclass
class WaferModel:
    spec: ModelSpec
    A: sp.csr_matrix               # T x T, float32
    B: np.ndarray                  # (T,) diagonal, float32
    P: sp.csr_matrix               # S x T, float32
    C: dict                        # axis -> (K, S) float32, row-major
    field_windows: list            # [(r0, r1), ...]
    slit_windows: list             # per field: [(r0, r1), ...] of width M
    _A64: sp.csr_matrix = field(default=None, repr=False)
    _P64: sp.csr_matrix = field(default=None, repr=False)

    @property
    def T(self):
        return self.spec.T

    @property
    def S(self):
        return self.spec.S

    @property
    def n_fields(self):
        return len(self.field_windows)

    def n_slits(self, field_id):
        self._check_field(field_id)
        return len(self.slit_windows[field_id])

    def A_f64(self):
        if self._A64 is None:
            self._A64 = self.A.astype(np.float64)
        return self._A64

    def P_f64(self):
        if self._P64 is None:
            self._P64 = self.P.astype(np.float64)
        return self._P64

    def _check_field(self, field_id):
        if not (0 <= field_id < len(self.field_windows)):
            raise WindowLookupError(f"unknown field id {field_id}")

    def fetch_field_submatrix(self, axis, field_id):
        """Row-window view (no copy) of the axis deformation operator."""
        self._check_field(field_id)
        r0, r1 = self.field_windows[field_id]
        return self.C[axis][r0:r1]

    def fetch_slit_submatrix(self, c_field, field_id, slit_id):
        """Row-window view of a slit inside an already-fetched field matrix."""
        self._check_field(field_id)
        slits = self.slit_windows[field_id]
        if not (0 <= slit_id < len(slits)):
            raise WindowLookupError(
                f"unknown slit id {slit_id} for field {field_id}")
        f0, f1 = self.field_windows[field_id]
        s0, s1 = slits[slit_id]
        if s0 < f0 or s1 > f1:
            raise WindowLookupError(
                f"slit window [{s0},{s1}) escapes field window [{f0},{f1})")
        return c_field[s0 - f0:s1 - f0]

    def validate(self):
        """Check the structural invariants; raises WhffError on violation."""
        spec = self.spec
        T, S, K = spec.T, spec.S, spec.K
        if self.A.shape != (T, T):
            raise WhffError("A is not square T x T")
        row_nnz = np.diff(self.A.indptr)
        if row_nnz.min() < 1:
            raise WhffError("A has an empty row")
        idx = self.A.indices
        increasing = np.diff(idx) > 0
        increasing[self.A.indptr[1:-1] - 1] = True  # row boundaries exempt
        if idx.size > 1 and not increasing.all():
            raise WhffError("A column indices not strictly increasing within a row")
        row_abs = np.asarray(np.abs(self.A).sum(axis=1)).ravel()
        if (row_abs > 1.0 + 1e-6).any():
            raise WhffError("A row absolute sums exceed 1")
        if self.B.shape != (T,):
            raise WhffError("B diagonal length mismatch")
        if self.P.shape != (S, T):
            raise WhffError("P shape mismatch")
        rs = np.asarray(self.P.sum(axis=1)).ravel()
        if np.abs(rs - 1.0).max() > 1e-6 or self.P.data.min() < 0:
            raise WhffError("P rows are not a nonnegative partition of unity")
        for f0, f1 in self.field_windows:
            if not (0 <= f0 < f1 <= K):
                raise WhffError(f"field window [{f0},{f1}) outside [0,{K})")
        for (f0, f1), slits in zip(self.field_windows, self.slit_windows):
            for s0, s1 in slits:
                if s1 - s0 != spec.M or s0 < f0 or s1 > f1:
                    raise WhffError(
                        f"slit window [{s0},{s1}) invalid for field [{f0},{f1})")


def dense_axis_bytes(spec):
    """Bytes of one dense K x S binary32 deformation operator."""
    return spec.K * spec.S * 4


def slit_bytes(spec):
    """Bytes of one M x S binary32 slit sub-matrix."""
    return spec.M * spec.S * 4


def generate_model(spec):
    if spec.T < 4:
        raise WhffError("grid must have at least 4 points")
    if spec.S > spec.T:
        raise WhffError(f"S ({spec.S}) must not exceed T ({spec.T})")
    if not (1 <= spec.M <= spec.K):
        raise WhffError(f"M ({spec.M}) must be in [1, K={spec.K}]")
    if spec.nnz_target < 1:
        raise WhffError("nnz_target must be >= 1")
    total = 3 * dense_axis_bytes(spec)
    if total > spec.mem_cap_bytes:
        raise ModelTooLargeError(
            f"dense deformation operators need {total} bytes "
            f"({dense_axis_bytes(spec)} per axis, slit sub-matrix "
            f"{slit_bytes(spec)} bytes) exceeding the cap of "
            f"{spec.mem_cap_bytes} bytes")

    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    A = _generate_thermal_operator(spec, rng)
    B = (0.5 + rng.random(spec.T) * 1.0).astype(np.float32)
    P = _generate_interpolation(spec)
    C = {axis: _generate_deformation(spec, rng, i)
         for i, axis in enumerate(AXES)}
    field_windows, slit_windows = _build_windows(spec)
    model = WaferModel(spec=spec, A=A, B=B, P=P, C=C,
                       field_windows=field_windows, slit_windows=slit_windows)
    model.validate()
    return model


def _generate_thermal_operator(spec, rng):
    R, Cg = spec.grid_rows, spec.grid_cols
    T = R * Cg
    n_neigh = min(spec.nnz_target - 1, len(_NEIGHBOR_OFFSETS))
    offsets = _NEIGHBOR_OFFSETS[:n_neigh]
    # per-row diffusion weight; leak keeps row sums strictly below 1
    alpha = (0.8 + 0.2 * rng.random(T)) * (0.5 / max(n_neigh, 1))
    leak = 0.002 + 0.008 * rng.random(T)
    rows, cols, vals = [], [], []
    r_idx, c_idx = np.divmod(np.arange(T), Cg)
    diag = np.ones(T)
    for dr, dc in offsets:
        rr, cc = r_idx + dr, c_idx + dc
        ok = (rr >= 0) & (rr < R) & (cc >= 0) & (cc < Cg)
        j = rr * Cg + cc
        w = alpha * ok
        rows.append(np.arange(T)[ok])
        cols.append(j[ok])
        vals.append(alpha[ok])
        diag -= w
    diag -= leak
    rows.append(np.arange(T))
    cols.append(np.arange(T))
    vals.append(diag)
    A = sp.csr_matrix((np.concatenate(vals).astype(np.float32),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(T, T))
    A.sort_indices()
    return A


def _generate_interpolation(spec):
    """Bilinear restriction of the T-point grid onto S sample points."""
    R, Cg, S, T = spec.grid_rows, spec.grid_cols, spec.S, spec.T
    sc = max(1, int(np.ceil(np.sqrt(S * Cg / R))))
    sr = int(np.ceil(S / sc))
    k = np.arange(S)
    fr = (k // sc) / max(sr - 1, 1) * (R - 1)
    fc = (k % sc) / max(sc - 1, 1) * (Cg - 1)
    fc = np.minimum(fc, Cg - 1)
    r0 = np.minimum(fr.astype(np.int64), R - 2) if R > 1 else np.zeros(S, np.int64)
    c0 = np.minimum(fc.astype(np.int64), Cg - 2) if Cg > 1 else np.zeros(S, np.int64)
    tr = fr - r0
    tc = fc - c0
    rows = np.repeat(k, 4)
    cols = np.empty(4 * S, dtype=np.int64)
    vals = np.empty(4 * S, dtype=np.float64)
    r1 = np.minimum(r0 + 1, R - 1)
    c1 = np.minimum(c0 + 1, Cg - 1)
    for i, (rr, cc, w) in enumerate([
            (r0, c0, (1 - tr) * (1 - tc)), (r0, c1, (1 - tr) * tc),
            (r1, c0, tr * (1 - tc)), (r1, c1, tr * tc)]):
        cols[i::4] = rr * Cg + cc
        vals[i::4] = w
    P = sp.csr_matrix((vals, (rows, cols)), shape=(S, T))
    P.sum_duplicates()
    P = P.astype(np.float32)
    # renormalize in float32 so the partition of unity holds in storage
    rs = np.asarray(P.sum(axis=1)).ravel()
    P = sp.diags(1.0 / rs).dot(P).astype(np.float32)
    P.sort_indices()
    return sp.csr_matrix(P)


def _generate_deformation(spec, rng, axis_index):
    K, S = spec.K, spec.S
    if spec.c_kind == "noise":
        return (spec.c_scale * rng.standard_normal((K, S))).astype(np.float32)
    # smooth spatial response: each row is a decaying bump around a center
    # that sweeps the sample axis; parameters vary smoothly with the row
    j = np.arange(S, dtype=np.float64)
    k = np.arange(K, dtype=np.float64)
    centers = (k / max(K - 1, 1)) * (S - 1)
    width = S * (0.08 + 0.04 * np.sin(2 * np.pi * k / max(K, 1) + axis_index))
    width = np.maximum(width, 2.0)
    amp = 1.0 + 0.3 * np.cos(2 * np.pi * k / max(K, 1) * (axis_index + 1))
    phase = rng.random() * 2 * np.pi
    d = j[None, :] - centers[:, None]
    c = amp[:, None] * np.exp(-0.5 * (d / width[:, None]) ** 2)
    c += 0.05 * np.cos(2 * np.pi * j[None, :] / S * (2 + axis_index) + phase)
    return (spec.c_scale * c).astype(np.float32)


def _build_windows(spec):
    n_fields = spec.n_fields
    if n_fields is None:
        n_fields = max(1, spec.K // (4 * spec.M))
    slits_per_field = (spec.K // n_fields) // spec.M
    if slits_per_field < 1:
        raise WhffError(
            f"cannot tile {n_fields} fields of >= {spec.M} rows into K={spec.K}")
    width = slits_per_field * spec.M
    field_windows = [(f * width, (f + 1) * width) for f in range(n_fields)]
    slit_windows = [[(f0 + s * spec.M, f0 + (s + 1) * spec.M)
                     for s in range(slits_per_field)]
                    for f0, _ in field_windows]
    return field_windows, slit_windows


# ---------------------------------------------------------------------------
# scan schedules
# ---------------------------------------------------------------------------

SCAN_DEFAULTS = {
    # light ms, dark ms, delivery budget ms
    "fast": (34, 36, 50.0),
    "slow": (80, 30, 80.0),
}


@dataclass(frozen=True)
class FieldSchedule:
    field_id: int
    t_l: int
    t_d: int
    time_budget_ms: float

    def slit_for_light_step(self, i, n_slits):
        """Monotone sweep mapping light millisecond i to one slit."""
        if not (0 <= i < self.t_l):
            raise ScheduleError(f"light step {i} outside [0,{self.t_l})")
        return (i * n_slits) // self.t_l


@dataclass(frozen=True)
class ScanSchedule:
    scan_kind: str
    fields: tuple

    @property
    def steps_per_field(self):
        f = self.fields[0]
        return f.t_l + f.t_d


def build_scan_schedule(kind, n_fields, t_l=None, t_d=None, budget_ms=None):
    if kind not in SCAN_DEFAULTS:
        raise ScheduleError(f"unknown scan kind {kind!r}")
    if n_fields < 1:
        raise ScheduleError("n_fields must be >= 1")
    d_tl, d_td, d_budget = SCAN_DEFAULTS[kind]
    t_l = d_tl if t_l is None else t_l
    t_d = d_td if t_d is None else t_d
    budget_ms = d_budget if budget_ms is None else budget_ms
    if t_l + t_d == 0:
        raise ScheduleError("schedule with zero duration (t_l + t_d = 0)")
    if t_l <= 0 or t_d < 0 or budget_ms <= 0:
        raise ScheduleError(
            f"invalid schedule: t_l={t_l}, t_d={t_d}, budget={budget_ms}")
    fields = tuple(FieldSchedule(f, t_l, t_d, float(budget_ms))
                   for f in range(n_fields))
    return ScanSchedule(scan_kind=kind, fields=fields)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

_MANIFEST = "model.json"


def save_model(model, directory):
    os.makedirs(directory, exist_ok=True)
    containers.write_csr(os.path.join(directory, "A.whfm"), model.A)
    containers.write_diag(os.path.join(directory, "B.whfm"), model.B)
    containers.write_csr(os.path.join(directory, "P.whfm"), model.P)
    for axis in AXES:
        containers.write_dense(os.path.join(directory, f"C_{axis}.whfm"),
                               model.C[axis])
    spec_dict = asdict(model.spec)
    manifest = {
        "format": "whff-model",
        "version": 1,
        "spec": spec_dict,
        "matrices": {
            "A": "A.whfm", "B": "B.whfm", "P": "P.whfm",
            **{f"C_{a}": f"C_{a}.whfm" for a in AXES},
        },
        "dimensions": {"T": model.T, "S": model.S, "K": model.spec.K,
                       "M": model.spec.M},
        "field_windows": [list(w) for w in model.field_windows],
        "slit_windows": [[list(s) for s in slits]
                         for slits in model.slit_windows],
    }
    with open(os.path.join(directory, _MANIFEST), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(directory):
    path = os.path.join(directory, _MANIFEST)
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise WhffError(f"no model manifest at {path}") from None
    spec = ModelSpec(**manifest["spec"])
    mats = manifest["matrices"]

    def p(name):
        return os.path.join(directory, mats[name])

    A = containers.read(p("A"))
    B = containers.read(p("B"))
    P = containers.read(p("P"))
    C = {a: containers.read_dense(p(f"C_{a}")) for a in AXES}
    model = WaferModel(
        spec=spec, A=sp.csr_matrix(A), B=np.asarray(B, dtype=np.float32),
        P=sp.csr_matrix(P), C=C,
        field_windows=[tuple(w) for w in manifest["field_windows"]],
        slit_windows=[[tuple(s) for s in slits]
                      for slits in manifest["slit_windows"]])
    return model
