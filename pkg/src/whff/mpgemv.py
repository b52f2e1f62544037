"""Mixed-precision dense matrix-vector kernels and rounding-error accounting.

The mixed policy stores inputs and outputs as binary32, multiplies in
binary32 and accumulates in binary64, which keeps the long reductions over
very wide rows from contaminating the significand the way a pure binary32
reduction does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import get_kernels
from .errors import DimensionError, NonFiniteError, WhffError

POLICIES = ("mixed", "single", "double")
SHAPES = ("sequential", "fixed-tree")


@dataclass(frozen=True)
class GemvRequest:
    matrix: np.ndarray
    vector: np.ndarray
    precision_policy: str = "mixed"
    reduction_shape: str = "sequential"
    fanout: int = 2

    def __post_init__(self):
        if self.precision_policy not in POLICIES:
            raise WhffError(f"unknown precision policy {self.precision_policy!r}")
        if self.reduction_shape not in SHAPES:
            raise WhffError(f"unknown reduction shape {self.reduction_shape!r}")
        if self.reduction_shape == "fixed-tree":
            f = self.fanout
            if f < 2 or (f & (f - 1)) != 0:
                raise WhffError(f"tree fanout must be a power of two >= 2, got {f}")


def _check_inputs(m, v):
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise DimensionError(
            f"gemv shapes do not agree: matrix {m.shape}, vector {v.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionError("gemv operands must be nonempty")
    if not np.isfinite(m).all():
        raise NonFiniteError("matrix", int(np.flatnonzero(~np.isfinite(m))[0]))
    if not np.isfinite(v).all():
        raise NonFiniteError("vector", int(np.flatnonzero(~np.isfinite(v))[0]))


def gemv(req, backend=None):
    """Evaluate a GemvRequest; returns a binary32 vector of row results."""
    kern = get_kernels(backend)
    m = np.ascontiguousarray(req.matrix, dtype=np.float32)
    v = np.ascontiguousarray(req.vector, dtype=np.float32)
    _check_inputs(m, v)
    return kern.gemv_kernel(m, v, req.precision_policy, req.reduction_shape,
                            req.fanout)


def gemv_oracle(matrix, vector):
    """Ground truth: full binary64 arithmetic, sequential summation order."""
    m = np.asarray(matrix, dtype=np.float64)
    v = np.asarray(vector, dtype=np.float64)
    _check_inputs(m, v)
    return np.cumsum(m * v, axis=1, dtype=np.float64)[:, -1]


def reduction_bits_lost(width):
    """Worst-case significand bits contaminated by a binary32 reduction.

    Upper-bound accounting: floor(log2(width)) bits for a sequential
    reduction of the given width.
    """
    if width < 1:
        raise WhffError(f"reduction width must be >= 1, got {width}")
    return int(math.floor(math.log2(width)))


def relative_error(result, reference):
    """Per-row relative error of a binary32 result against the binary64 oracle."""
    ref = np.asarray(reference, dtype=np.float64)
    res = np.asarray(result, dtype=np.float64)
    denom = np.abs(ref)
    denom[denom == 0] = 1.0
    return np.abs(res - ref) / denom
