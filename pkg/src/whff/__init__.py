"""Desk-scale wafer-heat feed-forward control pipeline.

Modules: model (synthetic operators and schedules), thermal (per-millisecond
state updates), mpgemv (mixed-precision dense products), codec (block
compression of deformation operators), pipeline (two-stage transfer/compute
overlap with firm deadlines), analysis (closed-form cost and roofline
models), bench (measured kernel throughput), cli (command-line front end).
"""

from .backend import BACKEND_NAME, available_backends

__all__ = ["BACKEND_NAME", "available_backends", "__version__"]
__version__ = "1.0.0"
