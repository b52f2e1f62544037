import numpy as np
import pytest

from whff import thermal
from whff.errors import DimensionError, NonFiniteError, WhffError


def dense_oracle_step(A, B, T_k, u_k):
    A = np.asarray(A.todense(), dtype=np.float64)
    return (A @ T_k.astype(np.float64)
            + B.astype(np.float64) * u_k.astype(np.float64)).astype(np.float32)


def test_step_matches_dense_oracle(small_model, rng):
    T = small_model.T
    t_k = rng.standard_normal(T).astype(np.float32)
    u_k = rng.standard_normal(T).astype(np.float32)
    got = thermal.thermal_step(small_model.A_f64(), small_model.B, t_k, u_k)
    want = dense_oracle_step(small_model.A, small_model.B, t_k, u_k)
    ref = np.abs(want.astype(np.float64))
    ref[ref == 0] = 1.0
    assert (np.abs(got.astype(np.float64) - want) / ref).max() <= 1e-6
    assert got.dtype == np.float32


def test_step_shape_mismatch(small_model, rng):
    t_k = rng.standard_normal(small_model.T - 1).astype(np.float32)
    u_k = rng.standard_normal(small_model.T).astype(np.float32)
    with pytest.raises(DimensionError):
        thermal.thermal_step(small_model.A_f64(), small_model.B, t_k, u_k)


def test_step_nonfinite_reported_with_index(small_model):
    t_k = np.zeros(small_model.T, dtype=np.float32)
    u_k = np.zeros(small_model.T, dtype=np.float32)
    u_k[7] = np.nan
    with pytest.raises(NonFiniteError) as exc:
        thermal.thermal_step(small_model.A_f64(), small_model.B, t_k, u_k)
    assert "7" in str(exc.value)


def test_interpolation_weighted_average_bounds(small_model, rng):
    # partition-of-unity rows keep interpolated values inside input range
    t = rng.random(small_model.T).astype(np.float32)
    s = thermal.thermal_interpolate(small_model.P_f64(), t)
    assert s.shape == (small_model.S,)
    assert s.min() >= t.min() - 1e-6
    assert s.max() <= t.max() + 1e-6


def test_bounded_input_keeps_state_bounded(small_model, small_heatload):
    # row abs sums < 1 make the update a contraction plus bounded input
    state = thermal.ThermalState.initial(small_model)
    from whff.model import FieldSchedule
    fs = FieldSchedule(0, 12, 6, 50.0)
    for _ in thermal.run_field_thermal(small_model, fs, small_heatload, state):
        pass
    bound = (np.abs(small_model.B).max()
             * (np.abs(small_heatload.dark_load).max()
                + max(np.abs(fp).max()
                      for fp in small_heatload._footprints.values()))
             / (1.0 - np.asarray(
                 np.abs(small_model.A).sum(axis=1)).ravel().max()))
    assert np.abs(state.temperatures).max() <= bound


def test_run_field_step_counts_and_phases(small_model, small_heatload):
    from whff.model import FieldSchedule
    fs = FieldSchedule(1, 9, 4, 50.0)
    state = thermal.ThermalState.initial(small_model)
    records = list(thermal.run_field_thermal(small_model, fs, small_heatload,
                                             state))
    assert len(records) == 13
    phases = [r[1] for r in records]
    assert phases == ["light"] * 9 + ["dark"] * 4
    assert all(r[3] is not None for r in records[:9])
    assert all(r[3] is None for r in records[9:])
    assert state.k == 13


def test_source_term_light_vs_dark(small_model, small_heatload):
    dark = thermal.source_term(small_heatload, 0, "dark")
    assert np.array_equal(dark, small_heatload.dark_load)
    light = thermal.source_term(small_heatload, 0, "light", 0)
    assert not np.array_equal(light, dark)
    with pytest.raises(WhffError):
        thermal.source_term(small_heatload, 0, "twilight")


def test_heatload_rejects_negative_footprint(small_model):
    dark = np.zeros(small_model.T, dtype=np.float32)
    fp = np.zeros(small_model.T, dtype=np.float32)
    fp[0] = -1.0
    with pytest.raises(WhffError):
        thermal.HeatLoad(dark, {(0, 0): fp})


def test_heatload_allows_negative_dark(small_model):
    dark = -np.ones(small_model.T, dtype=np.float32)
    load = thermal.HeatLoad(dark, {})
    assert load.dark_load.min() == -1.0


def test_synthetic_heatload_deterministic(small_model):
    a = thermal.synthetic_heatload(small_model, seed=9)
    b = thermal.synthetic_heatload(small_model, seed=9)
    assert np.array_equal(a.dark_load, b.dark_load)
    for key in a._footprints:
        assert np.array_equal(a._footprints[key], b._footprints[key])
