"""Pure-Python/numpy implementations of the hot kernels.

This module is the fallback backend; `whff._kernels` (Cython) implements the
same functions with identical results. Both backends must produce bit-exact
outputs: the GEMV kernels pin the summation order and the codec kernels pin
the bitstream layout.

GEMV precision policies:
  mixed  - binary32 products, binary64 accumulation, binary32 result
  single - binary32 products and accumulation
  double - binary64 products of the binary32 inputs, binary64 accumulation

Reduction shapes: "sequential" is strict left-to-right; "fixed-tree" reduces
over consecutive index groups of size `fanout` per level, each group summed
left-to-right, zero-padded to a full group.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


# ---------------------------------------------------------------------------
# GEMV kernels
# ---------------------------------------------------------------------------

def _products(m, v, prec):
    # binary32 multiply rounds each product to binary32 before accumulation;
    # the double policy forms exact binary64 products instead.
    if prec == "double":
        return m.astype(np.float64) * v.astype(np.float64)
    return m * v  # float32 * float32 -> float32, round-to-nearest


def _tree_sum(p, fanout):
    # p: (H, W) in the accumulation dtype; returns (H,) summed per row.
    while p.shape[1] > 1:
        w = p.shape[1]
        pad = (-w) % fanout
        if pad:
            p = np.concatenate([p, np.zeros((p.shape[0], pad), dtype=p.dtype)], axis=1)
        p = p.reshape(p.shape[0], -1, fanout)
        acc = p[:, :, 0].copy()
        for j in range(1, fanout):
            acc += p[:, :, j]
        p = acc
    return p[:, 0]


def gemv_kernel(m, v, policy, shape, fanout=0):
    """Dense matrix-vector product under a precision policy.

    m: float32 (H, W) C-contiguous; v: float32 (W,).
    Returns float32 (H,).
    """
    acc = np.float32 if policy == "single" else np.float64
    p = _products(m, v, policy)
    if shape == "sequential":
        out = np.cumsum(p, axis=1, dtype=acc)[:, -1]
    else:
        out = _tree_sum(p.astype(acc, copy=False), fanout)
    return out.astype(np.float32)


# ---------------------------------------------------------------------------
# Codec bit-plane coder
# ---------------------------------------------------------------------------
#
# Per-block bitstream (positions relative to the block's bit offset):
#   9 bits   biased common exponent, MSB first; 0 marks an all-zero block
#            (no further content).
#   1 bit    raw escape flag (only when has_raw_flag, i.e. fixed-accuracy
#            mode). If set: 16 x 32 bits follow, the IEEE-754 binary32 bit
#            patterns of the block values in raster order, MSB first.
#   planes   p = n_planes-1 .. n_planes-planes[b], each plane:
#              refinement bit for every already-significant coefficient, in
#              sequency order; then a significance pass over the still-
#              insignificant coefficients: a 1-bit group flag (1 = at least
#              one coefficient in the remainder has bit p set), and if set,
#              one bit per coefficient up to and including the first set one,
#              followed by its sign bit (1 = negative); repeat on the
#              remainder.
#
# Fixed-rate truncation: emission stops at the bit budget; a significance hit
# whose sign bit would not fit is emitted as 0 instead; the segment is then
# zero-padded to exactly the budget. Decoders treat out-of-budget reads as
# end-of-block, and a set significance bit with an unavailable sign bit is
# ignored, so truncated and padded segments decode consistently.


def encode_blocks(mag, neg, emax_code, planes, raw_mask, raw_words,
                  n_planes, budget_bits, has_raw_flag):
    """Assemble the per-block bitstreams.

    mag: uint32 (nb, 16) coefficient magnitudes in sequency order.
    neg: uint8 (nb, 16) sign bits. emax_code: uint16 (nb).
    planes: uint8 (nb) bit planes to emit per block.
    raw_mask/raw_words: raw-escape blocks (used when has_raw_flag).
    budget_bits: exact per-block segment length (0 = unbounded).

    Returns (payload uint8 array, bit offsets uint64 (nb,), total_bits).
    """
    nb = mag.shape[0]
    mag = mag.astype(np.int64, copy=False)
    bits_out = []
    offsets = np.zeros(nb, dtype=np.uint64)
    pos = 0
    for b in range(nb):
        offsets[b] = pos
        blk = _encode_one(mag[b], neg[b], int(emax_code[b]), int(planes[b]),
                          bool(raw_mask[b]) if has_raw_flag else False,
                          raw_words[b] if has_raw_flag else None,
                          n_planes, budget_bits, has_raw_flag)
        bits_out.append(blk)
        pos += len(blk)
    total_bits = pos
    if total_bits:
        flat = np.concatenate(bits_out)
    else:
        flat = np.zeros(0, dtype=np.uint8)
    payload = np.packbits(flat)
    return payload, offsets, total_bits


def _encode_one(mag, neg, emax_code, planes, raw, raw_words,
                n_planes, budget, has_raw_flag):
    out = []
    emit = out.append

    def emit_uint(value, width):
        for i in range(width - 1, -1, -1):
            emit((value >> i) & 1)

    emit_uint(emax_code, 9)
    if has_raw_flag:
        emit(1 if raw else 0)
    if raw:
        for w in raw_words:
            emit_uint(int(w), 32)
    elif emax_code != 0:
        sig = [False] * 16
        done = False
        for p in range(n_planes - 1, n_planes - 1 - planes, -1):
            if done:
                break
            # refinement pass
            for c in range(16):
                if sig[c]:
                    if budget and len(out) >= budget:
                        done = True
                        break
                    emit((int(mag[c]) >> p) & 1)
            if done:
                break
            # significance pass
            remaining = [c for c in range(16) if not sig[c]]
            while remaining:
                if budget and len(out) >= budget:
                    done = True
                    break
                flag = any((int(mag[c]) >> p) & 1 for c in remaining)
                emit(1 if flag else 0)
                if not flag:
                    break
                hit = False
                for i, c in enumerate(remaining):
                    if budget and len(out) >= budget:
                        done = True
                        break
                    bit = (int(mag[c]) >> p) & 1
                    if bit and budget and len(out) == budget - 1:
                        emit(0)  # sign would not fit; declare insignificant
                        done = True
                        break
                    emit(bit)
                    if bit:
                        emit(int(neg[c]))
                        sig[c] = True
                        remaining = remaining[i + 1:]
                        hit = True
                        break
                if done or not hit:
                    break
            if done:
                break
    if budget:
        out = out[:budget] + [0] * max(0, budget - len(out))
    return np.asarray(out, dtype=np.uint8)


def decode_blocks(payload, offsets, seglens, n_planes, planes_limit,
                  has_raw_flag):
    """Parse per-block bitstreams back into coefficients.

    Returns (mag uint32 (nb,16), neg uint8 (nb,16), emax_code uint16 (nb),
    raw uint8 (nb), raw_words uint32 (nb,16), consumed uint64 (nb)).
    """
    nb = offsets.shape[0]
    bits = np.unpackbits(np.asarray(payload, dtype=np.uint8))
    mag = np.zeros((nb, 16), dtype=np.uint32)
    neg = np.zeros((nb, 16), dtype=np.uint8)
    emax_code = np.zeros(nb, dtype=np.uint16)
    raw = np.zeros(nb, dtype=np.uint8)
    raw_words = np.zeros((nb, 16), dtype=np.uint32)
    consumed = np.zeros(nb, dtype=np.uint64)
    for b in range(nb):
        start = int(offsets[b])
        limit = start + int(seglens[b])
        pos = _decode_one(bits, start, limit, mag[b], neg[b], raw_words[b],
                          b, emax_code, raw, n_planes, planes_limit,
                          has_raw_flag)
        consumed[b] = pos - start
    return mag, neg, emax_code, raw, raw_words, consumed


def _decode_one(bits, start, limit, mag, neg, raw_words, b, emax_code,
                raw_arr, n_planes, planes_limit, has_raw_flag):
    pos = start

    def read():
        nonlocal pos
        if pos >= limit:
            return -1
        v = int(bits[pos])
        pos += 1
        return v

    code = 0
    for _ in range(9):
        v = read()
        if v < 0:
            return pos
        code = (code << 1) | v
    emax_code[b] = code
    if has_raw_flag:
        v = read()
        if v < 0:
            return pos
        if v:
            raw_arr[b] = 1
            for c in range(16):
                w = 0
                for _ in range(32):
                    u = read()
                    if u < 0:
                        return pos
                    w = (w << 1) | u
                raw_words[c] = w
            return pos
    if code == 0:
        return pos
    sig = [False] * 16
    for p in range(n_planes - 1, n_planes - 1 - planes_limit, -1):
        if pos >= limit:
            break
        for c in range(16):
            if sig[c]:
                v = read()
                if v < 0:
                    return pos
                if v:
                    mag[c] |= np.uint32(1 << p)
        remaining = [c for c in range(16) if not sig[c]]
        while remaining:
            flag = read()
            if flag <= 0:
                break
            hit = False
            for i, c in enumerate(remaining):
                v = read()
                if v < 0:
                    return pos
                if v:
                    s = read()
                    if s < 0:
                        return pos  # sign unavailable: ignore the hit
                    mag[c] |= np.uint32(1 << p)
                    neg[c] = s
                    sig[c] = True
                    remaining = remaining[i + 1:]
                    hit = True
                    break
            if not hit:
                break
    return pos
