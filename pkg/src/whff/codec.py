"""Block transform compressor for 2D binary32 arrays.

The input is split into 4x4 blocks (edges padded by replication). Each block
is aligned to a common exponent as fixed point, decorrelated with a
reversible integer lifting transform, reordered by total sequency and emitted
as sign-magnitude bit planes, most significant first. Three control modes
bound the output: a fixed bit budget per value, a fixed number of preserved
bit planes, or a hard absolute error tolerance.

Fixed-accuracy plane selection is verified: the encoder reconstructs each
candidate truncation and keeps the shortest one whose true pointwise error is
within tolerance; blocks that cannot meet the tolerance are stored verbatim
(raw escape), so the bound holds for every finite input, including
tolerance 0 (lossless via the escape).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .backend import get_kernels
from .errors import CorruptStreamError, DimensionError, WhffError

BLOCK = 4
N_PLANES = 27          # magnitude bit planes per coefficient
QUANT_BITS = 26        # fixed-point fractional bits relative to block max
EMAX_BIAS = 160        # biased 9-bit common-exponent code; 0 = zero block

MAGIC = b"WHFZ"
VERSION = 1

_MODE_RATE = 0
_MODE_PRECISION = 1
_MODE_ACCURACY = 2

# total-sequency coefficient order inside a 4x4 block (ties broken by row)
SEQUENCY = sorted(range(16), key=lambda k: (k // 4 + k % 4, k // 4))
_INV_SEQUENCY = np.argsort(SEQUENCY)


@dataclass(frozen=True)
class FixedRate:
    bpv: int

    def __post_init__(self):
        if not (isinstance(self.bpv, int) and 1 <= self.bpv <= 32):
            raise WhffError(f"fixed-rate bits per value must be in 1..32, got {self.bpv}")


@dataclass(frozen=True)
class FixedPrecision:
    planes: int

    def __post_init__(self):
        if not (isinstance(self.planes, int) and 1 <= self.planes <= 32):
            raise WhffError(f"fixed-precision planes must be in 1..32, got {self.planes}")


@dataclass(frozen=True)
class FixedAccuracy:
    tolerance: float

    def __post_init__(self):
        if not (self.tolerance >= 0.0):
            raise WhffError(f"tolerance must be nonnegative, got {self.tolerance}")


@dataclass
class CompressedStream:
    mode: object
    rows: int
    cols: int
    payload: np.ndarray          # uint8
    block_index: np.ndarray      # uint64 bit offsets, one per block
    total_bits: int
    block_size: int = BLOCK
    version: int = VERSION
    exact_bits: bool = True      # False when total_bits was inferred from bytes

    @property
    def n_blocks(self):
        return self.block_index.shape[0]

    @property
    def padded_shape(self):
        r = (self.rows + BLOCK - 1) // BLOCK * BLOCK
        c = (self.cols + BLOCK - 1) // BLOCK * BLOCK
        return r, c


@dataclass
class CodecMetrics:
    bits_per_value: float
    ratio: float
    rmse: float
    nrmse: float
    max_pointwise_error: float
    psnr: float

    def as_dict(self):
        return {
            "bits_per_value": self.bits_per_value,
            "ratio": self.ratio,
            "rmse": self.rmse,
            "nrmse": self.nrmse,
            "max_pointwise_error": self.max_pointwise_error,
            "psnr": self.psnr,
        }


# ---------------------------------------------------------------------------
# transform
# ---------------------------------------------------------------------------

def _fwd_lift(v):
    # v: (..., 4) int64, lifted in place along the last axis
    x, y, z, w = v[..., 0], v[..., 1], v[..., 2], v[..., 3]
    x += w; x >>= 1; w -= x
    z += y; z >>= 1; y -= z
    x += z; x >>= 1; z -= x
    w += y; w >>= 1; y -= w
    w += y >> 1; y -= w >> 1


def _inv_lift(v):
    x, y, z, w = v[..., 0], v[..., 1], v[..., 2], v[..., 3]
    y += w >> 1; w -= y >> 1
    y += w; w <<= 1; w -= y
    z += x; x <<= 1; x -= z
    y += z; z <<= 1; z -= y
    w += x; x <<= 1; x -= w


def _forward_transform(blocks):
    t = blocks.copy()
    _fwd_lift(t)                       # rows
    t = np.swapaxes(t, -1, -2).copy()
    _fwd_lift(t)                       # columns
    return np.swapaxes(t, -1, -2)


def _inverse_transform(coeffs):
    t = np.swapaxes(coeffs, -1, -2).copy()
    _inv_lift(t)
    t = np.swapaxes(t, -1, -2).copy()
    _inv_lift(t)
    return t


# ---------------------------------------------------------------------------
# blocking helpers
# ---------------------------------------------------------------------------

def _to_blocks(array):
    rows, cols = array.shape
    pr = (-rows) % BLOCK
    pc = (-cols) % BLOCK
    padded = np.pad(array, ((0, pr), (0, pc)), mode="edge")
    br, bc = padded.shape[0] // BLOCK, padded.shape[1] // BLOCK
    blocks = padded.reshape(br, BLOCK, bc, BLOCK).transpose(0, 2, 1, 3)
    return np.ascontiguousarray(blocks).reshape(br * bc, BLOCK, BLOCK), (br, bc)


def _from_blocks(blocks, grid, rows, cols):
    br, bc = grid
    padded = blocks.reshape(br, bc, BLOCK, BLOCK).transpose(0, 2, 1, 3)
    padded = padded.reshape(br * BLOCK, bc * BLOCK)
    return np.ascontiguousarray(padded[:rows, :cols])


def _valid_mask(grid, rows, cols):
    br, bc = grid
    m = np.zeros((br * BLOCK, bc * BLOCK), dtype=bool)
    m[:rows, :cols] = True
    blocks = m.reshape(br, BLOCK, bc, BLOCK).transpose(0, 2, 1, 3)
    return np.ascontiguousarray(blocks).reshape(br * bc, BLOCK, BLOCK)


# ---------------------------------------------------------------------------
# quantization
# ---------------------------------------------------------------------------

def _block_exponents(blocks):
    maxabs = np.abs(blocks).max(axis=(1, 2)).astype(np.float64)
    _, e = np.frexp(maxabs)            # maxabs < 2**e for maxabs > 0
    code = np.where(maxabs > 0, e + EMAX_BIAS, 0).astype(np.uint16)
    return code


def _quantize(blocks, emax_code):
    emax = emax_code.astype(np.int64) - EMAX_BIAS
    scale = np.ldexp(1.0, (QUANT_BITS - emax).astype(np.int32))
    q = np.rint(blocks.astype(np.float64) * scale[:, None, None]).astype(np.int64)
    q[emax_code == 0] = 0
    return q


def _dequantize(q, emax_code):
    emax = emax_code.astype(np.int64) - EMAX_BIAS
    scale = np.ldexp(1.0, (emax - QUANT_BITS).astype(np.int32))
    out = q.astype(np.float64) * scale[:, None, None]
    out[emax_code == 0] = 0.0
    return out.astype(np.float32)


def _reconstruct_blocks(mag, neg, emax_code, raw, raw_words):
    coeffs = mag.astype(np.int64)
    coeffs[neg != 0] *= -1
    coeffs = coeffs[:, _INV_SEQUENCY].reshape(-1, BLOCK, BLOCK)
    q = _inverse_transform(coeffs)
    out = _dequantize(q, emax_code)
    if raw is not None and raw.any():
        rb = raw_words.view(np.float32).reshape(-1, BLOCK, BLOCK)
        out[raw != 0] = rb[raw != 0]
    return out


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def compress(array, mode, backend=None):
    kern = get_kernels(backend)
    array = np.asarray(array)
    if array.ndim != 2 or array.shape[0] < 1 or array.shape[1] < 1:
        raise DimensionError(f"codec input must be 2D and nonempty, got shape {array.shape}")
    array = array.astype(np.float32, copy=False)
    if not np.isfinite(array).all():
        raise WhffError("codec input contains non-finite values")
    rows, cols = array.shape

    blocks, grid = _to_blocks(array)
    nb = blocks.shape[0]
    emax_code = _block_exponents(blocks)
    q = _quantize(blocks, emax_code)
    coeffs = _forward_transform(q).reshape(nb, 16)[:, SEQUENCY]
    if np.abs(coeffs).max(initial=0) >= (1 << N_PLANES):
        raise WhffError("internal error: transform coefficient overflow")
    mag = np.abs(coeffs).astype(np.uint32)
    neg = (coeffs < 0).astype(np.uint8)

    raw_mask = np.zeros(nb, dtype=np.uint8)
    raw_words = np.zeros((nb, 16), dtype=np.uint32)
    budget = 0
    has_raw = False
    if isinstance(mode, FixedRate):
        budget = mode.bpv * 16
        planes = np.full(nb, N_PLANES, dtype=np.uint8)
    elif isinstance(mode, FixedPrecision):
        planes = np.full(nb, min(mode.planes, N_PLANES), dtype=np.uint8)
    elif isinstance(mode, FixedAccuracy):
        has_raw = True
        planes, raw_mask = _select_planes(array, blocks, grid, mag, neg,
                                          emax_code, mode.tolerance)
        raw_words = np.ascontiguousarray(
            blocks.reshape(nb, 16)).view(np.uint32).reshape(nb, 16).copy()
        raw_words[raw_mask == 0] = 0
    else:
        raise WhffError(f"unknown codec mode {mode!r}")

    payload, offsets, total_bits = kern.encode_blocks(
        mag, neg, emax_code, planes, raw_mask, raw_words,
        N_PLANES, budget, has_raw)
    return CompressedStream(mode=mode, rows=rows, cols=cols, payload=payload,
                            block_index=offsets, total_bits=total_bits)


def _select_planes(array, blocks, grid, mag, neg, emax_code, tol):
    """Smallest per-block plane count whose verified error is within tol."""
    nb = blocks.shape[0]
    rows, cols = array.shape
    mask = _valid_mask(grid, rows, cols)
    orig = blocks.astype(np.float64)
    planes = np.full(nb, N_PLANES + 1, dtype=np.int64)  # sentinel: unresolved
    best_err_ok = np.zeros(nb, dtype=bool)
    for t in range(N_PLANES + 1):
        shift = np.uint32(N_PLANES - t)
        tmag = (mag >> shift) << shift
        dec = _reconstruct_blocks(tmag, neg, emax_code, None, None)
        err = np.abs(dec.astype(np.float64) - orig)
        err[~mask] = 0.0
        ok = err.max(axis=(1, 2)) <= tol
        newly = ok & ~best_err_ok
        planes[newly] = t
        best_err_ok |= ok
        if best_err_ok.all():
            break
    raw_mask = (planes > N_PLANES).astype(np.uint8)
    planes[planes > N_PLANES] = 0
    return planes.astype(np.uint8), raw_mask


def decompress(stream, backend=None):
    kern = get_kernels(backend)
    _validate_stream(stream)
    nb = stream.n_blocks
    seglens = _segment_lengths(stream)
    planes_limit = N_PLANES
    if isinstance(stream.mode, FixedPrecision):
        planes_limit = min(stream.mode.planes, N_PLANES)
    mag, neg, emax_code, raw, raw_words, _ = kern.decode_blocks(
        stream.payload, stream.block_index, seglens, N_PLANES, planes_limit,
        isinstance(stream.mode, FixedAccuracy))
    blocks = _reconstruct_blocks(mag.astype(np.uint32), neg, emax_code,
                                 raw, raw_words)
    pr, pc = stream.padded_shape
    grid = (pr // BLOCK, pc // BLOCK)
    out = _from_blocks(blocks, grid, stream.rows, stream.cols)
    if not np.isfinite(out).all():
        raise CorruptStreamError("decoded array contains non-finite values")
    return out


def decode_block(stream, index, backend=None):
    """Decode one 4x4 block independently through the block index."""
    kern = get_kernels(backend)
    _validate_stream(stream)
    if not (0 <= index < stream.n_blocks):
        raise CorruptStreamError(f"block index {index} out of range")
    seglens = _segment_lengths(stream)
    planes_limit = N_PLANES
    if isinstance(stream.mode, FixedPrecision):
        planes_limit = min(stream.mode.planes, N_PLANES)
    mag, neg, emax_code, raw, raw_words, _ = kern.decode_blocks(
        stream.payload, stream.block_index[index:index + 1],
        seglens[index:index + 1], N_PLANES, planes_limit,
        isinstance(stream.mode, FixedAccuracy))
    return _reconstruct_blocks(mag.astype(np.uint32), neg, emax_code,
                               raw, raw_words)[0]


def _segment_lengths(stream):
    nb = stream.n_blocks
    if isinstance(stream.mode, FixedRate):
        return np.full(nb, stream.mode.bpv * 16, dtype=np.uint64)
    ends = np.empty(nb, dtype=np.uint64)
    ends[:-1] = stream.block_index[1:]
    ends[-1] = stream.payload.size * 8
    if (ends < stream.block_index).any():
        raise CorruptStreamError("block index offsets are not nondecreasing")
    return ends - stream.block_index


def _validate_stream(stream):
    if stream.block_size != BLOCK:
        raise CorruptStreamError(f"unsupported block size {stream.block_size}")
    pr, pc = stream.padded_shape
    nb = (pr // BLOCK) * (pc // BLOCK)
    if stream.block_index.shape[0] != nb:
        raise CorruptStreamError("block index length does not match dimensions")
    if stream.block_index.size and int(stream.block_index.max()) >= max(
            stream.payload.size * 8, 1):
        raise CorruptStreamError("block index offsets point past the payload")


def codec_metrics(original, decoded, stream):
    original = np.asarray(original, dtype=np.float32)
    decoded = np.asarray(decoded, dtype=np.float32)
    if original.shape != decoded.shape:
        raise DimensionError(
            f"metric shapes differ: {original.shape} vs {decoded.shape}")
    diff = original.astype(np.float64) - decoded.astype(np.float64)
    rmse = float(np.sqrt(np.mean(diff * diff)))
    vrange = float(original.max() - original.min())
    max_err = float(np.abs(diff).max())
    pr, pc = stream.padded_shape
    bpv = stream.total_bits / (pr * pc)
    ratio = 32.0 / bpv if bpv > 0 else float("inf")
    if rmse == 0.0:
        psnr = float("inf")
        nrmse = 0.0
    else:
        nrmse = rmse / vrange if vrange > 0 else float("inf")
        # range-based PSNR: 20*log10((max-min) / (2*rmse))
        psnr = (float(20.0 * np.log10(vrange / (2.0 * rmse)))
                if vrange > 0 else float("-inf"))
    return CodecMetrics(bits_per_value=bpv, ratio=ratio, rmse=rmse,
                        nrmse=nrmse, max_pointwise_error=max_err, psnr=psnr)


# ---------------------------------------------------------------------------
# stream file format
# ---------------------------------------------------------------------------

def save_stream(path, stream):
    mode = stream.mode
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", stream.version))
        if isinstance(mode, FixedRate):
            fh.write(struct.pack("<BI", _MODE_RATE, mode.bpv))
        elif isinstance(mode, FixedPrecision):
            fh.write(struct.pack("<BI", _MODE_PRECISION, mode.planes))
        else:
            fh.write(struct.pack("<Bd", _MODE_ACCURACY, mode.tolerance))
        fh.write(struct.pack("<QQBQ", stream.rows, stream.cols,
                             stream.block_size, stream.n_blocks))
        fh.write(stream.block_index.astype("<u8").tobytes())
        fh.write(np.asarray(stream.payload, dtype=np.uint8).tobytes())


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise CorruptStreamError(f"truncated stream: missing {what}")
    return buf


def load_stream(path):
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != MAGIC:
            raise CorruptStreamError(f"bad stream magic {magic!r}")
        (version,) = struct.unpack("<H", _read_exact(fh, 2, "version"))
        if version != VERSION:
            raise CorruptStreamError(f"unsupported stream version {version}")
        (mode_code,) = struct.unpack("<B", _read_exact(fh, 1, "mode"))
        if mode_code == _MODE_RATE:
            (bpv,) = struct.unpack("<I", _read_exact(fh, 4, "mode parameter"))
            mode = FixedRate(bpv)
        elif mode_code == _MODE_PRECISION:
            (p,) = struct.unpack("<I", _read_exact(fh, 4, "mode parameter"))
            mode = FixedPrecision(p)
        elif mode_code == _MODE_ACCURACY:
            (tol,) = struct.unpack("<d", _read_exact(fh, 8, "mode parameter"))
            mode = FixedAccuracy(tol)
        else:
            raise CorruptStreamError(f"unknown mode code {mode_code}")
        rows, cols, block_size, nb = struct.unpack(
            "<QQBQ", _read_exact(fh, 25, "dimensions"))
        block_index = np.frombuffer(
            _read_exact(fh, nb * 8, "block index"), dtype="<u8").copy()
        payload = np.frombuffer(fh.read(), dtype=np.uint8).copy()
    if isinstance(mode, FixedRate):
        total_bits = nb * mode.bpv * 16
        exact = True
        if payload.size * 8 < total_bits:
            raise CorruptStreamError("truncated stream payload")
    else:
        total_bits = payload.size * 8
        exact = False
    stream = CompressedStream(mode=mode, rows=rows, cols=cols, payload=payload,
                              block_index=block_index, total_bits=total_bits,
                              block_size=block_size, version=version,
                              exact_bits=exact)
    _validate_stream(stream)
    return stream
