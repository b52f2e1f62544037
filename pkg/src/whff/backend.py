"""Kernel backend selection.

The compiled extension (`whff._kernels`, Cython) is preferred when importable;
otherwise the numpy fallback (`whff._kernels_py`) is used. Both expose the
same functions with bit-identical results. Set WHFF_BACKEND=python or
WHFF_BACKEND=compiled to force a choice.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_forced = os.environ.get("WHFF_BACKEND")
if _forced == "python":
    kernels = _kernels_py
elif _forced == "compiled":
    if _compiled is None:
        raise ImportError(
            "WHFF_BACKEND=compiled but the whff._kernels extension is not built")
    kernels = _compiled
elif _forced:
    raise ImportError(f"unknown WHFF_BACKEND value {_forced!r}")
else:
    kernels = _compiled if _compiled is not None else _kernels_py

BACKEND_NAME = kernels.NAME


def available_backends():
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out


def get_kernels(name=None):
    if name is None:
        return kernels
    return available_backends()[name]
