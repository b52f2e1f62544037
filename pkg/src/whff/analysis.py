"""Analytic cost models: FLOP cost, I/O cost, roofline curves, QoI error.

All formulas are closed-form in the model dimensions and scan timing so they
evaluate instantly at full production scale, independent of the desk-scale
executable models.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass

import numpy as np

from .errors import WhffError

DEFORMATION_STEP_MODES = ("as-printed", "light")


@dataclass(frozen=True)
class CostParams:
    T: int                 # thermal grid points
    S: int                 # interpolation sample points
    M: int                 # slit rows per deformation product
    nnz_A: int             # nonzeros per row of the propagation operator
    nnz_B: int             # nonzeros per row of the input scaling operator
    t_l: int               # light milliseconds per field
    t_d: int               # dark milliseconds per field
    budget_ms: float       # delivery budget per field

    def __post_init__(self):
        if min(self.T, self.S, self.M, self.nnz_A, self.nnz_B, self.t_l) < 1:
            raise WhffError("cost parameters must be positive")
        if self.t_d < 0:
            raise WhffError("t_d must be nonnegative")
        if self.budget_ms <= 0:
            raise WhffError("budget must be positive")


@dataclass(frozen=True)
class Platform:
    name: str
    peak_sp_flops: float
    peak_dp_flops: float
    mem_bandwidth: float   # bytes/s
    price_usd: float

    def __post_init__(self):
        if min(self.peak_sp_flops, self.peak_dp_flops,
               self.mem_bandwidth, self.price_usd) <= 0:
            raise WhffError(f"platform {self.name!r} has nonpositive values")


# Parameter presets at production scale; the timing splits reproduce the
# published per-field throughput targets.
PRESETS = {
    "paper-fast": CostParams(T=370_000, S=256_000, M=378, nnz_A=7, nnz_B=1,
                             t_l=34, t_d=36, budget_ms=50.0),
    "paper-slow": CostParams(T=370_000, S=256_000, M=378, nnz_A=7, nnz_B=1,
                             t_l=80, t_d=30, budget_ms=80.0),
}


def flop_cost(p, deformation_steps="as-printed"):
    """Per-field FLOP count and the throughput the budget implies.

    The deformation term is multiplied by t_d in the as-printed reading and
    by t_l in the light-steps-only reading; both are supported because the
    published formula and its surrounding prose disagree.
    """
    if deformation_steps not in DEFORMATION_STEP_MODES:
        raise WhffError(
            f"deformation_steps must be one of {DEFORMATION_STEP_MODES}")
    t_x = p.t_d if deformation_steps == "as-printed" else p.t_l
    deform = 3 * t_x * p.M * (2 * p.S - 1)
    thermal = p.T * (p.t_l + p.t_d) * (2 * p.nnz_A + 2 * p.nnz_B - 1)
    total = deform + thermal
    return {
        "total_flop": total,
        "gflops_required": total / (p.budget_ms * 1e-3) / 1e9,
    }


def io_cost(p):
    """Per-field I/O operation count (values moved) for one scanned field."""
    return (p.t_l + p.t_d) * p.T * (2 * p.T + 3) \
        + 3 * p.t_d * (p.M * p.S + p.S + p.M)


def io_cost_breakdown(p):
    """Thermal and deformation contributions to the per-field I/O count."""
    thermal = (p.t_l + p.t_d) * p.T * (2 * p.T + 3)
    deform = 3 * p.t_d * (p.M * p.S + p.S + p.M)
    return {"thermal": thermal, "deformation": deform, "total": thermal + deform}


def io_bytes_per_s(p, bytes_per_value=4):
    """I/O cost converted to sustained bandwidth over the field budget."""
    return io_cost(p) * bytes_per_value / (p.budget_ms * 1e-3)


def roofline_attainable(pl, ai):
    """Attainable FLOP/s at arithmetic intensity ai (FLOP per byte)."""
    if ai <= 0:
        raise WhffError(f"arithmetic intensity must be positive, got {ai}")
    return min(pl.peak_sp_flops, ai * pl.mem_bandwidth)


def normalized_roofline(pl, ai):
    """Attainable FLOP/s per dollar: roofline divided by platform price."""
    return roofline_attainable(pl, ai) / pl.price_usd


def ridge_point(pl):
    """Intensity at which a platform turns compute-bound."""
    return pl.peak_sp_flops / pl.mem_bandwidth


def qoi_error(ref_deformations, test_deformations):
    """Per-axis relative error of delivered deformations.

    Returns {axis: {"l2": ..., "max": ...}} where l2 is the relative
    Euclidean norm of the difference and max is the worst per-entry relative
    error (entries with zero reference compare absolutely).
    """
    out = {}
    for axis, ref in ref_deformations.items():
        test = np.asarray(test_deformations[axis], dtype=np.float64)
        ref = np.asarray(ref, dtype=np.float64)
        if ref.shape != test.shape:
            raise WhffError(
                f"axis {axis}: shapes differ {ref.shape} vs {test.shape}")
        norm = np.linalg.norm(ref)
        if norm == 0:
            raise WhffError(f"axis {axis}: reference deformation has zero norm")
        l2 = np.linalg.norm(test - ref) / norm
        denom = np.abs(ref)
        denom[denom == 0] = 1.0
        mx = float(np.max(np.abs(test - ref) / denom))
        out[axis] = {"l2": float(l2), "max": mx}
    return out


def load_platforms(path=None):
    """Platform entries from a JSON file; defaults to the bundled samples."""
    if path is None:
        ref = importlib.resources.files("whff").joinpath(
            "data/platforms.json")
        text = ref.read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WhffError(f"invalid platform file: {exc}") from None
    platforms = []
    for entry in raw:
        try:
            platforms.append(Platform(
                name=entry["name"],
                peak_sp_flops=float(entry["peak_sp"]),
                peak_dp_flops=float(entry["peak_dp"]),
                mem_bandwidth=float(entry["bandwidth"]),
                price_usd=float(entry["price"])))
        except KeyError as exc:
            raise WhffError(f"platform entry missing key {exc}") from None
    return platforms
