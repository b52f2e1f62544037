# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Mirrors whff._kernels_py exactly: the GEMV kernels pin the same summation
order per precision policy, and the codec bit coder produces byte-identical
payloads. Any divergence between the backends is a bug.
"""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc
from libc.string cimport memset

cnp.import_array()

NAME = "compiled"


# ---------------------------------------------------------------------------
# GEMV kernels
# ---------------------------------------------------------------------------

cdef void _seq_rows(const float[:, ::1] m, const float[::1] v, int policy,
                    float[::1] out) noexcept nogil:
    # policy: 0 = mixed (f32 products, f64 acc), 1 = single, 2 = double
    cdef Py_ssize_t i, j, h = m.shape[0], w = m.shape[1]
    cdef double acc_d
    cdef float acc_f, prod_f
    for i in range(h):
        if policy == 1:
            acc_f = 0.0
            for j in range(w):
                prod_f = m[i, j] * v[j]
                acc_f = acc_f + prod_f
            out[i] = acc_f
        elif policy == 2:
            acc_d = 0.0
            for j in range(w):
                acc_d = acc_d + (<double> m[i, j]) * (<double> v[j])
            out[i] = <float> acc_d
        else:
            acc_d = 0.0
            for j in range(w):
                prod_f = m[i, j] * v[j]
                acc_d = acc_d + (<double> prod_f)
            out[i] = <float> acc_d


cdef void _tree_row_f64(double* buf, Py_ssize_t w, int fanout) noexcept nogil:
    # in-place level-by-level reduction; groups of `fanout` summed
    # left-to-right, missing tail entries treated as zero
    cdef Py_ssize_t g, j, ngroups, idx
    cdef double acc
    while w > 1:
        ngroups = (w + fanout - 1) // fanout
        for g in range(ngroups):
            acc = buf[g * fanout]
            for j in range(1, fanout):
                idx = g * fanout + j
                acc = acc + (buf[idx] if idx < w else 0.0)
            buf[g] = acc
        w = ngroups


cdef void _tree_row_f32(float* buf, Py_ssize_t w, int fanout) noexcept nogil:
    cdef Py_ssize_t g, j, ngroups, idx
    cdef float acc
    while w > 1:
        ngroups = (w + fanout - 1) // fanout
        for g in range(ngroups):
            acc = buf[g * fanout]
            for j in range(1, fanout):
                idx = g * fanout + j
                acc = acc + (buf[idx] if idx < w else <float> 0.0)
            buf[g] = acc
        w = ngroups


def gemv_kernel(m, v, policy, shape, fanout=0):
    """Dense matrix-vector product under a precision policy.

    m: float32 (H, W) C-contiguous; v: float32 (W,). Returns float32 (H,).
    """
    cdef const float[:, ::1] mv = m
    cdef const float[::1] vv = v
    cdef Py_ssize_t h = mv.shape[0], w = mv.shape[1], i, j
    cdef int pol = 1 if policy == "single" else (2 if policy == "double" else 0)
    cdef int fo = int(fanout)
    out = np.empty(h, dtype=np.float32)
    cdef float[::1] ov = out
    cdef double* dbuf
    cdef float* fbuf
    cdef double acc_d
    cdef float acc_f

    if shape == "sequential":
        with nogil:
            _seq_rows(mv, vv, pol, ov)
        return out

    if pol == 1:
        fbuf = <float*> malloc(w * sizeof(float))
        if fbuf == NULL:
            raise MemoryError()
        try:
            with nogil:
                for i in range(h):
                    for j in range(w):
                        fbuf[j] = mv[i, j] * vv[j]
                    _tree_row_f32(fbuf, w, fo)
                    ov[i] = fbuf[0]
        finally:
            free(fbuf)
    else:
        dbuf = <double*> malloc(w * sizeof(double))
        if dbuf == NULL:
            raise MemoryError()
        try:
            with nogil:
                for i in range(h):
                    if pol == 2:
                        for j in range(w):
                            dbuf[j] = (<double> mv[i, j]) * (<double> vv[j])
                    else:
                        for j in range(w):
                            dbuf[j] = <double> (mv[i, j] * vv[j])
                    _tree_row_f64(dbuf, w, fo)
                    ov[i] = <float> dbuf[0]
        finally:
            free(dbuf)
    return out


# ---------------------------------------------------------------------------
# Codec bit-plane coder (see whff._kernels_py for the bitstream layout)
# ---------------------------------------------------------------------------

cdef int _encode_one(long long* mag, unsigned char* neg, int emax_code,
                     int planes, int raw, unsigned int* raw_words,
                     int n_planes, int budget, int has_raw_flag,
                     unsigned char* out) noexcept nogil:
    # writes bits into `out`, returns the emitted length (pre-budget-pad)
    cdef int n = 0, i, p, c, v, bit, flag, hit, done, rem_start
    cdef unsigned char sig[16]
    cdef int remaining[16]
    cdef int nrem, k

    for i in range(8, -1, -1):
        out[n] = (emax_code >> i) & 1
        n += 1
    if has_raw_flag:
        out[n] = 1 if raw else 0
        n += 1
    if raw:
        for c in range(16):
            for i in range(31, -1, -1):
                out[n] = (raw_words[c] >> i) & 1
                n += 1
    elif emax_code != 0:
        for c in range(16):
            sig[c] = 0
        done = 0
        for p in range(n_planes - 1, n_planes - 1 - planes, -1):
            if done:
                break
            # refinement pass
            for c in range(16):
                if sig[c]:
                    if budget and n >= budget:
                        done = 1
                        break
                    out[n] = (mag[c] >> p) & 1
                    n += 1
            if done:
                break
            # significance pass
            nrem = 0
            for c in range(16):
                if not sig[c]:
                    remaining[nrem] = c
                    nrem += 1
            while nrem > 0:
                if budget and n >= budget:
                    done = 1
                    break
                flag = 0
                for k in range(nrem):
                    if (mag[remaining[k]] >> p) & 1:
                        flag = 1
                        break
                out[n] = flag
                n += 1
                if not flag:
                    break
                hit = 0
                for k in range(nrem):
                    c = remaining[k]
                    if budget and n >= budget:
                        done = 1
                        break
                    bit = (mag[c] >> p) & 1
                    if bit and budget and n == budget - 1:
                        out[n] = 0  # sign would not fit
                        n += 1
                        done = 1
                        break
                    out[n] = bit
                    n += 1
                    if bit:
                        out[n] = neg[c]
                        n += 1
                        sig[c] = 1
                        # drop the consumed prefix of `remaining`
                        rem_start = k + 1
                        for i in range(nrem - rem_start):
                            remaining[i] = remaining[rem_start + i]
                        nrem = nrem - rem_start
                        hit = 1
                        break
                if done or not hit:
                    break
            if done:
                break
    return n


def encode_blocks(mag, neg, emax_code, planes, raw_mask, raw_words,
                  n_planes, budget_bits, has_raw_flag):
    """Assemble the per-block bitstreams; see whff._kernels_py for layout."""
    cdef long long[:, ::1] magv = np.ascontiguousarray(mag, dtype=np.int64)
    cdef unsigned char[:, ::1] negv = np.ascontiguousarray(neg, dtype=np.uint8)
    cdef unsigned short[::1] emaxv = np.ascontiguousarray(emax_code,
                                                          dtype=np.uint16)
    cdef unsigned char[::1] planesv = np.ascontiguousarray(planes,
                                                           dtype=np.uint8)
    cdef unsigned char[::1] rawm = np.ascontiguousarray(raw_mask,
                                                        dtype=np.uint8)
    cdef unsigned int[:, ::1] raww = np.ascontiguousarray(raw_words,
                                                          dtype=np.uint32)
    cdef Py_ssize_t nb = magv.shape[0], b
    cdef int npl = int(n_planes), budget = int(budget_bits)
    cdef int hrf = 1 if has_raw_flag else 0
    cdef int blen, cap, i

    offsets = np.zeros(nb, dtype=np.uint64)
    cdef unsigned long long[::1] offv = offsets
    # worst-case bits per block: header + raw flag + raw words + planes
    cap = 9 + 1 + 16 * 32 + npl * (16 + 33)
    if budget > cap:
        cap = budget
    cdef unsigned char* blk = <unsigned char*> malloc(cap)
    if blk == NULL:
        raise MemoryError()

    cdef unsigned long long total = 0
    # two passes would need re-encoding; instead grow a Python-side buffer
    chunks = []
    try:
        for b in range(nb):
            offv[b] = total
            memset(blk, 0, cap)
            blen = _encode_one(&magv[b, 0], &negv[b, 0], emaxv[b],
                               planesv[b], rawm[b] if hrf else 0,
                               &raww[b, 0], npl, budget, hrf, blk)
            if budget:
                if blen > budget:
                    blen = budget
                # zero padding up to the budget is already in blk (memset)
                blen = budget
            arr = np.empty(blen, dtype=np.uint8)
            for i in range(blen):
                arr[i] = blk[i]
            chunks.append(arr)
            total += blen
    finally:
        free(blk)
    if total:
        flat = np.concatenate(chunks)
    else:
        flat = np.zeros(0, dtype=np.uint8)
    payload = np.packbits(flat)
    return payload, offsets, int(total)


cdef long long _decode_one(const unsigned char[::1] bits, long long start,
                           long long limit, unsigned int* mag,
                           unsigned char* neg, unsigned int* raw_words,
                           unsigned short* emax_out, unsigned char* raw_out,
                           int n_planes, int planes_limit,
                           int has_raw_flag) noexcept nogil:
    cdef long long pos = start
    cdef int code = 0, i, p, c, v, flag, hit, s, nrem, k, rem_start, w
    cdef unsigned char sig[16]
    cdef int remaining[16]

    for i in range(9):
        if pos >= limit:
            return pos
        code = (code << 1) | bits[pos]
        pos += 1
    emax_out[0] = <unsigned short> code
    if has_raw_flag:
        if pos >= limit:
            return pos
        v = bits[pos]
        pos += 1
        if v:
            raw_out[0] = 1
            for c in range(16):
                w = 0
                for i in range(32):
                    if pos >= limit:
                        return pos
                    w = (w << 1) | bits[pos]
                    pos += 1
                raw_words[c] = <unsigned int> w
            return pos
    if code == 0:
        return pos
    for c in range(16):
        sig[c] = 0
    for p in range(n_planes - 1, n_planes - 1 - planes_limit, -1):
        if pos >= limit:
            break
        for c in range(16):
            if sig[c]:
                if pos >= limit:
                    return pos
                if bits[pos]:
                    mag[c] = mag[c] | (<unsigned int> 1 << p)
                pos += 1
        nrem = 0
        for c in range(16):
            if not sig[c]:
                remaining[nrem] = c
                nrem += 1
        while nrem > 0:
            if pos >= limit:
                return pos
            flag = bits[pos]
            pos += 1
            if not flag:
                break
            hit = 0
            for k in range(nrem):
                c = remaining[k]
                if pos >= limit:
                    return pos
                v = bits[pos]
                pos += 1
                if v:
                    if pos >= limit:
                        return pos  # sign unavailable: ignore the hit
                    s = bits[pos]
                    pos += 1
                    mag[c] = mag[c] | (<unsigned int> 1 << p)
                    neg[c] = <unsigned char> s
                    sig[c] = 1
                    rem_start = k + 1
                    for i in range(nrem - rem_start):
                        remaining[i] = remaining[rem_start + i]
                    nrem = nrem - rem_start
                    hit = 1
                    break
            if not hit:
                break
    return pos


def decode_blocks(payload, offsets, seglens, n_planes, planes_limit,
                  has_raw_flag):
    """Parse per-block bitstreams back into coefficients."""
    cdef const unsigned char[::1] bits = np.unpackbits(
        np.ascontiguousarray(payload, dtype=np.uint8))
    cdef unsigned long long[::1] offv = np.ascontiguousarray(
        offsets, dtype=np.uint64)
    cdef unsigned long long[::1] segv = np.ascontiguousarray(
        seglens, dtype=np.uint64)
    cdef Py_ssize_t nb = offv.shape[0], b
    cdef int npl = int(n_planes), plim = int(planes_limit)
    cdef int hrf = 1 if has_raw_flag else 0
    cdef long long nbits = bits.shape[0], start, limit, pos

    mag = np.zeros((nb, 16), dtype=np.uint32)
    neg = np.zeros((nb, 16), dtype=np.uint8)
    emax_code = np.zeros(nb, dtype=np.uint16)
    raw = np.zeros(nb, dtype=np.uint8)
    raw_words = np.zeros((nb, 16), dtype=np.uint32)
    consumed = np.zeros(nb, dtype=np.uint64)
    cdef unsigned int[:, ::1] magv = mag
    cdef unsigned char[:, ::1] negv = neg
    cdef unsigned short[::1] emaxv = emax_code
    cdef unsigned char[::1] rawv = raw
    cdef unsigned int[:, ::1] rawwv = raw_words
    cdef unsigned long long[::1] consv = consumed

    with nogil:
        for b in range(nb):
            start = <long long> offv[b]
            limit = start + <long long> segv[b]
            if limit > nbits:
                limit = nbits
            pos = _decode_one(bits, start, limit, &magv[b, 0], &negv[b, 0],
                              &rawwv[b, 0], &emaxv[b], &rawv[b], npl, plim,
                              hrf)
            consv[b] = <unsigned long long> (pos - start)
    return mag, neg, emax_code, raw, raw_words, consumed
