"""Little-endian binary container for dense, CSR and diagonal matrices.

Layout: magic "WHFM", format version u16, kind u8 (0=dense, 1=csr, 2=diag),
element type u8 (0=binary32, 1=binary64), rows u64, cols u64, then the
kind-specific payload:

  dense: rows*cols values, row-major
  csr:   nnz u64, row offsets (rows+1)*u64, column indices nnz*u32, values
  diag:  rows values

Vectors are stored as rows x 1 dense matrices.
"""

from __future__ import annotations

import struct

import numpy as np
import scipy.sparse as sp

from .errors import CorruptStreamError

MAGIC = b"WHFM"
VERSION = 1

KIND_DENSE = 0
KIND_CSR = 1
KIND_DIAG = 2

_ELEM_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_ELEM_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}

_HEADER = struct.Struct("<4sHBBQQ")


def _elem_code(dtype):
    try:
        return _ELEM_CODES[np.dtype(dtype)]
    except KeyError:
        raise ValueError(f"unsupported element type {dtype}") from None


def write_dense(path, array):
    array = np.ascontiguousarray(array)
    code = _elem_code(array.dtype)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2:
        raise ValueError("dense container stores 2D arrays")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, KIND_DENSE, code,
                              array.shape[0], array.shape[1]))
        fh.write(array.astype(f"<f{array.itemsize}", copy=False).tobytes())


def write_csr(path, matrix):
    matrix = sp.csr_matrix(matrix)
    matrix.sort_indices()
    code = _elem_code(matrix.dtype)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, KIND_CSR, code,
                              matrix.shape[0], matrix.shape[1]))
        fh.write(struct.pack("<Q", matrix.nnz))
        fh.write(matrix.indptr.astype("<u8").tobytes())
        fh.write(matrix.indices.astype("<u4").tobytes())
        fh.write(matrix.data.astype(f"<f{matrix.data.itemsize}", copy=False).tobytes())


def write_diag(path, diagonal):
    diagonal = np.ascontiguousarray(diagonal).reshape(-1)
    code = _elem_code(diagonal.dtype)
    n = diagonal.shape[0]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, KIND_DIAG, code, n, n))
        fh.write(diagonal.astype(f"<f{diagonal.itemsize}", copy=False).tobytes())


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise CorruptStreamError(f"truncated container: expected {n} bytes of {what}")
    return buf


def read(path):
    """Read any WHFM container.

    Returns an ndarray for dense/diag kinds and a scipy CSR matrix for csr.
    """
    with open(path, "rb") as fh:
        header = _read_exact(fh, _HEADER.size, "header")
        magic, version, kind, elem, rows, cols = _HEADER.unpack(header)
        if magic != MAGIC:
            raise CorruptStreamError(f"bad container magic {magic!r}")
        if version != VERSION:
            raise CorruptStreamError(f"unsupported container version {version}")
        if elem not in _ELEM_DTYPES:
            raise CorruptStreamError(f"unknown element type code {elem}")
        dtype = _ELEM_DTYPES[elem]
        if kind == KIND_DENSE:
            buf = _read_exact(fh, rows * cols * dtype.itemsize, "dense payload")
            return np.frombuffer(buf, dtype=dtype).reshape(rows, cols).copy()
        if kind == KIND_DIAG:
            buf = _read_exact(fh, rows * dtype.itemsize, "diag payload")
            return np.frombuffer(buf, dtype=dtype).copy()
        if kind == KIND_CSR:
            (nnz,) = struct.unpack("<Q", _read_exact(fh, 8, "nnz"))
            indptr = np.frombuffer(
                _read_exact(fh, (rows + 1) * 8, "row offsets"), dtype="<u8")
            indices = np.frombuffer(
                _read_exact(fh, nnz * 4, "column indices"), dtype="<u4")
            data = np.frombuffer(
                _read_exact(fh, nnz * dtype.itemsize, "values"), dtype=dtype)
            if indptr[-1] != nnz:
                raise CorruptStreamError("csr row offsets do not match nnz")
            return sp.csr_matrix(
                (data.copy(), indices.astype(np.int64), indptr.astype(np.int64)),
                shape=(rows, cols))
        raise CorruptStreamError(f"unknown matrix kind code {kind}")


def read_dense(path):
    out = read(path)
    if not isinstance(out, np.ndarray) or out.ndim != 2:
        raise CorruptStreamError(f"{path} does not hold a dense matrix")
    return out


def read_vector(path):
    """Read a diag container or a single-column dense container as 1-D."""
    out = read(path)
    if not isinstance(out, np.ndarray):
        raise CorruptStreamError(f"{path} does not hold vector data")
    if out.ndim == 2 and out.shape[1] != 1:
        raise CorruptStreamError(f"{path} holds a {out.shape} matrix, "
                                 "not a vector")
    return out.reshape(-1)
