"""Per-millisecond thermal model: source term, state update, interpolation.

The temperature update is T_{k+1} = A*T_k + B*u_k with the sparse propagation
operator A and the diagonal input scaling B. All reductions accumulate in
binary64 and results are stored in binary32. The heat loads are dimensionless
synthetic quantities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NonFiniteError, WhffError


@dataclass
class ThermalState:
    k: int
    temperatures: np.ndarray       # (T,) float32
    interpolated: np.ndarray       # (S,) float32

    @classmethod
    def initial(cls, model):
        return cls(k=0,
                   temperatures=np.zeros(model.T, dtype=np.float32),
                   interpolated=np.zeros(model.S, dtype=np.float32))


class HeatLoad:
    """Dark-phase load plus per-slit illumination footprints.

    dark_load may be negative (cooling hood); footprints are nonnegative.
    """

    def __init__(self, dark_load, light_footprints, dose_scale=1.0):
        dark_load = np.asarray(dark_load, dtype=np.float32)
        if not np.isfinite(dark_load).all():
            raise NonFiniteError("dark_load",
                                 int(np.flatnonzero(~np.isfinite(dark_load))[0]))
        self.dark_load = dark_load
        self._footprints = {}
        for key, fp in light_footprints.items():
            fp = np.asarray(fp, dtype=np.float32)
            if not np.isfinite(fp).all():
                raise NonFiniteError(f"light_load{key}",
                                     int(np.flatnonzero(~np.isfinite(fp))[0]))
            if (fp < 0).any():
                raise WhffError(f"light footprint {key} has negative entries")
            self._footprints[key] = fp
        self.dose_scale = float(dose_scale)

    def light_load(self, field_id, slit_id):
        try:
            return self._footprints[(field_id, slit_id)]
        except KeyError:
            raise WhffError(
                f"no light footprint for field {field_id} slit {slit_id}") from None


def synthetic_heatload(model, seed=0, dose_scale=1.0, cooling=1e-3):
    """Seeded loads: a uniform cooling term and a bump per (field, slit)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x48454154]))
    T = model.T
    dark = (-cooling * (0.5 + 0.5 * rng.random(T))).astype(np.float32)
    pts = np.arange(T, dtype=np.float64)
    footprints = {}
    for f in range(model.n_fields):
        n_slits = model.n_slits(f)
        for s in range(n_slits):
            center = ((f * n_slits + s + 0.5)
                      / (model.n_fields * n_slits)) * T
            width = max(T * 0.02, 2.0)
            fp = np.exp(-0.5 * ((pts - center) / width) ** 2)
            fp *= 0.5 + 0.5 * rng.random()
            footprints[(f, s)] = fp.astype(np.float32)
    return HeatLoad(dark, footprints, dose_scale)


def source_term(load, field_id, phase, slit_id=None):
    """u_k for one schedule step; phase is "light" or "dark"."""
    if phase == "dark":
        return load.dark_load.copy()
    if phase != "light":
        raise WhffError(f"step phase must be light or dark, got {phase!r}")
    fp = load.light_load(field_id, slit_id)
    return (np.float32(load.dose_scale) * fp + load.dark_load).astype(np.float32)


def _check_vector(name, v, n):
    if v.shape != (n,):
        raise DimensionError(f"{name} has shape {v.shape}, expected ({n},)")
    if not np.isfinite(v).all():
        raise NonFiniteError(name, int(np.flatnonzero(~np.isfinite(v))[0]))


def thermal_step(A64, B, T_k, u_k):
    """One update T_{k+1} = A*T_k + B*u_k.

    A64: CSR with binary64 values (binary32 storage widened once up front);
    B: (T,) binary32 diagonal. Accumulation is binary64, result binary32.
    """
    n = A64.shape[0]
    _check_vector("T_k", T_k, n)
    _check_vector("u_k", u_k, n)
    acc = A64.dot(T_k.astype(np.float64))
    acc += B.astype(np.float64) * u_k.astype(np.float64)
    return acc.astype(np.float32)


def thermal_interpolate(P64, T_next):
    """S_{k+1} = P*T_{k+1} with binary64 accumulation."""
    if P64.shape[1] != T_next.shape[0]:
        raise DimensionError(
            f"interpolation shapes differ: P is {P64.shape}, T is {T_next.shape}")
    return P64.dot(T_next.astype(np.float64)).astype(np.float32)


def run_field_thermal(model, field_schedule, load, state):
    """Advance the thermal state across one field; yields per-step records.

    Yields (k, phase, slit_id, S_next) tuples; S_next is None for dark steps.
    """
    A64 = model.A_f64()
    P64 = model.P_f64()
    n_slits = model.n_slits(field_schedule.field_id)
    for i in range(field_schedule.t_l + field_schedule.t_d):
        if i < field_schedule.t_l:
            phase = "light"
            slit = field_schedule.slit_for_light_step(i, n_slits)
        else:
            phase, slit = "dark", None
        u = source_term(load, field_schedule.field_id, phase, slit)
        t_next = thermal_step(A64, model.B, state.temperatures, u)
        s_next = thermal_interpolate(P64, t_next)
        state.k += 1
        state.temperatures = t_next
        state.interpolated = s_next
        yield state.k, phase, slit, (s_next if phase == "light" else None)
