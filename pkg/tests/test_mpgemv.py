import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whff import mpgemv
from whff.errors import DimensionError, NonFiniteError, WhffError
from whff.mpgemv import GemvRequest, gemv, gemv_oracle, reduction_bits_lost


def seq_oracle_mixed(m, v):
    # independent reference: explicit left-to-right loop
    out = np.empty(m.shape[0], dtype=np.float32)
    for i in range(m.shape[0]):
        acc = 0.0
        for j in range(m.shape[1]):
            acc += float(np.float32(m[i, j] * v[j]))
        out[i] = np.float32(acc)
    return out


def test_mixed_sequential_matches_loop_oracle(rng):
    m = rng.standard_normal((5, 37)).astype(np.float32)
    v = rng.standard_normal(37).astype(np.float32)
    got = gemv(GemvRequest(m, v, "mixed", "sequential"))
    assert np.array_equal(got, seq_oracle_mixed(m, v))


def test_single_sequential_matches_float32_cumsum(rng):
    m = rng.standard_normal((4, 100)).astype(np.float32)
    v = rng.standard_normal(100).astype(np.float32)
    got = gemv(GemvRequest(m, v, "single", "sequential"))
    want = np.cumsum(m * v, axis=1, dtype=np.float32)[:, -1]
    assert np.array_equal(got, want)


def test_double_policy_matches_oracle_rounding(rng):
    m = rng.standard_normal((6, 64)).astype(np.float32)
    v = rng.standard_normal(64).astype(np.float32)
    got = gemv(GemvRequest(m, v, "double", "sequential"))
    assert np.array_equal(got, gemv_oracle(m, v).astype(np.float32))


def test_tree_reduction_fanout2_matches_pairwise(rng):
    m = rng.standard_normal((3, 8)).astype(np.float32)
    v = rng.standard_normal(8).astype(np.float32)
    got = gemv(GemvRequest(m, v, "mixed", "fixed-tree", fanout=2))
    p = (m * v).astype(np.float64)
    # explicit pairwise tree for width 8
    l1 = p[:, ::2] + p[:, 1::2]
    l2 = l1[:, ::2] + l1[:, 1::2]
    want = (l2[:, 0] + l2[:, 1]).astype(np.float32)
    assert np.array_equal(got, want)


def test_tree_zero_padding_width_not_power(rng):
    m = rng.standard_normal((2, 5)).astype(np.float32)
    v = rng.standard_normal(5).astype(np.float32)
    got = gemv(GemvRequest(m, v, "mixed", "fixed-tree", fanout=4))
    p = (m * v).astype(np.float64)
    want = ((p[:, 0] + p[:, 1] + p[:, 2] + p[:, 3]) + p[:, 4]).astype(np.float32)
    assert np.array_equal(got, want)


def test_mixed_beats_single_on_wide_rows(rng):
    m = rng.standard_normal((32, 8192)).astype(np.float32)
    v = rng.standard_normal(8192).astype(np.float32)
    ref = gemv_oracle(m, v)
    err_mixed = mpgemv.relative_error(
        gemv(GemvRequest(m, v, "mixed", "sequential")), ref)
    err_single = mpgemv.relative_error(
        gemv(GemvRequest(m, v, "single", "sequential")), ref)
    assert np.median(err_mixed) < np.median(err_single)


def test_result_dtype_is_float32(rng):
    m = rng.standard_normal((2, 3)).astype(np.float32)
    v = rng.standard_normal(3).astype(np.float32)
    for policy in ("mixed", "single", "double"):
        assert gemv(GemvRequest(m, v, policy, "sequential")).dtype == np.float32


def test_request_validation(rng):
    m = rng.standard_normal((2, 3)).astype(np.float32)
    v = rng.standard_normal(3).astype(np.float32)
    with pytest.raises(WhffError):
        GemvRequest(m, v, "half", "sequential")
    with pytest.raises(WhffError):
        GemvRequest(m, v, "mixed", "spiral")
    with pytest.raises(WhffError):
        GemvRequest(m, v, "mixed", "fixed-tree", fanout=3)
    with pytest.raises(WhffError):
        GemvRequest(m, v, "mixed", "fixed-tree", fanout=1)


def test_input_validation(rng):
    m = rng.standard_normal((2, 3)).astype(np.float32)
    with pytest.raises(DimensionError):
        gemv(GemvRequest(m, np.zeros(4, np.float32)))
    bad = m.copy()
    bad[1, 2] = np.inf
    with pytest.raises(NonFiniteError) as exc:
        gemv(GemvRequest(bad, np.zeros(3, np.float32)))
    assert "matrix" in str(exc.value)


def test_reduction_bits_lost_examples():
    assert reduction_bits_lost(1) == 0
    assert reduction_bits_lost(2) == 1
    assert reduction_bits_lost(4) == 2
    assert reduction_bits_lost(256000) == 17
    with pytest.raises(WhffError):
        reduction_bits_lost(0)


@settings(max_examples=50, deadline=None)
@given(rows=st.integers(1, 8), cols=st.integers(1, 64),
       seed=st.integers(0, 2 ** 31))
def test_mixed_error_bounded_property(rows, cols, seed):
    r = np.random.default_rng(seed)
    m = r.standard_normal((rows, cols)).astype(np.float32)
    v = r.standard_normal(cols).astype(np.float32)
    ref = gemv_oracle(m, v)
    got = gemv(GemvRequest(m, v, "mixed", "sequential"))
    scale = np.abs(np.abs(m) @ np.abs(v).astype(np.float64))
    scale[scale == 0] = 1.0
    # products round once to binary32; binary64 accumulation adds no
    # significant error at these widths
    bound = (cols + 1) * np.finfo(np.float32).eps * scale
    assert (np.abs(got.astype(np.float64) - ref) <= bound + 1e-300).all()


@settings(max_examples=30, deadline=None)
@given(cols=st.integers(1, 40), fanout=st.sampled_from([2, 4, 8]),
       seed=st.integers(0, 2 ** 31))
def test_tree_double_policy_exact_vs_math_sum(cols, fanout, seed):
    # binary64 products of binary32 inputs are exact; a tree reduction of
    # exact terms equals the exact sum whenever the sum stays integral
    r = np.random.default_rng(seed)
    m = r.integers(-50, 50, (3, cols)).astype(np.float32)
    v = r.integers(-50, 50, cols).astype(np.float32)
    got = gemv(GemvRequest(m, v, "double", "fixed-tree", fanout=fanout))
    want = (m.astype(np.float64) @ v.astype(np.float64)).astype(np.float32)
    assert np.array_equal(got, want)
