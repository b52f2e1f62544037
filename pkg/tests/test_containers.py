import numpy as np
import pytest
import scipy.sparse as sp

from whff import containers
from whff.errors import CorruptStreamError


def test_dense_round_trip(tmp_path, rng):
    arr = rng.standard_normal((7, 13)).astype(np.float32)
    path = tmp_path / "a.whfm"
    containers.write_dense(path, arr)
    back = containers.read_dense(path)
    assert back.dtype == np.float32
    assert np.array_equal(back, arr)


def test_dense_float64_round_trip(tmp_path, rng):
    arr = rng.standard_normal((3, 5))
    path = tmp_path / "a.whfm"
    containers.write_dense(path, arr)
    assert np.array_equal(containers.read_dense(path), arr)


def test_csr_round_trip(tmp_path, rng):
    dense = rng.standard_normal((9, 11))
    dense[dense < 0.5] = 0.0
    m = sp.csr_matrix(dense.astype(np.float32))
    path = tmp_path / "m.whfm"
    containers.write_csr(path, m)
    back = containers.read(path)
    assert sp.issparse(back)
    assert (back != m).nnz == 0


def test_diag_round_trip(tmp_path, rng):
    d = rng.standard_normal(17).astype(np.float32)
    path = tmp_path / "d.whfm"
    containers.write_diag(path, d)
    back = containers.read_vector(path)
    assert np.array_equal(back, d)


def test_bad_magic_raises(tmp_path):
    path = tmp_path / "bad.whfm"
    path.write_bytes(b"NOPE" + b"\x00" * 30)
    with pytest.raises(CorruptStreamError):
        containers.read(path)


def test_truncated_payload_raises(tmp_path, rng):
    arr = rng.standard_normal((6, 6)).astype(np.float32)
    path = tmp_path / "t.whfm"
    containers.write_dense(path, arr)
    data = path.read_bytes()
    path.write_bytes(data[:len(data) - 8])
    with pytest.raises(CorruptStreamError):
        containers.read(path)


def test_dense_read_of_csr_raises(tmp_path, rng):
    m = sp.csr_matrix(np.eye(4, dtype=np.float32))
    path = tmp_path / "m.whfm"
    containers.write_csr(path, m)
    with pytest.raises(CorruptStreamError):
        containers.read_dense(path)


def test_little_endian_header_layout(tmp_path):
    arr = np.zeros((2, 3), dtype=np.float32)
    path = tmp_path / "h.whfm"
    containers.write_dense(path, arr)
    raw = path.read_bytes()
    assert raw[:4] == b"WHFM"
    rows = int.from_bytes(raw[8:16], "little")
    cols = int.from_bytes(raw[16:24], "little")
    assert (rows, cols) == (2, 3)
