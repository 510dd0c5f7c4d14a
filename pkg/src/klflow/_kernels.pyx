# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels.

Signature-compatible with ``_kernels_py``; that module documents the
semantics. Philox bits are bit-identical to the numpy path; the
finite-volume steps agree to floating-point rounding.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport expm1, fabs
from libc.stdint cimport uint32_t as u32, uint64_t as u64

cnp.import_array()

IMPLEMENTATION = "compiled"


cdef inline double _bern(double z) noexcept nogil:
    if fabs(z) < 1e-5:
        return 1.0 - 0.5 * z + z * z / 12.0
    return z / expm1(z)


def philox_bits(seed, step, streams_in, int blocks):
    cdef u64 seed_u = <u64> (int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef u32 step_u = <u32> (int(step) & 0xFFFFFFFF)
    streams_arr = np.ascontiguousarray(streams_in, dtype=np.uint64)
    cdef cnp.uint64_t[::1] streams = streams_arr
    cdef Py_ssize_t n = streams.shape[0]

    out_arr = np.empty((n, 2 * blocks), dtype=np.uint64)
    cdef cnp.uint64_t[:, ::1] out = out_arr

    cdef u32 k0_base = <u32> (seed_u & 0xFFFFFFFFu)
    cdef u32 k1_base = <u32> (seed_u >> 32)
    cdef u32[10] k0r
    cdef u32[10] k1r
    cdef int r
    for r in range(10):
        k0r[r] = <u32> (k0_base + <u32> (r * 0x9E3779B9u))
        k1r[r] = <u32> (k1_base + <u32> (r * 0xBB67AE85u))

    cdef Py_ssize_t i
    cdef int b
    cdef u32 c0, c1, c2, c3, hi0, lo0, hi1, lo1
    cdef u64 p0, p1, s
    with nogil:
        for i in range(n):
            s = streams[i]
            for b in range(blocks):
                c0 = <u32> b
                c1 = <u32> (s & 0xFFFFFFFFu)
                c2 = <u32> (s >> 32)
                c3 = step_u
                for r in range(10):
                    p0 = (<u64> 0xD2511F53u) * c0
                    p1 = (<u64> 0xCD9E8D57u) * c2
                    hi0 = <u32> (p0 >> 32)
                    lo0 = <u32> p0
                    hi1 = <u32> (p1 >> 32)
                    lo1 = <u32> p1
                    c0 = hi1 ^ c1 ^ k0r[r]
                    c1 = lo1
                    c2 = hi0 ^ c3 ^ k1r[r]
                    c3 = lo0
                out[i, 2 * b] = ((<u64> c0) << 32) | c1
                out[i, 2 * b + 1] = ((<u64> c2) << 32) | c3
    return out_arr


def fp_step_1d(q_in, w_in, double dt, double h):
    q_arr = np.ascontiguousarray(q_in, dtype=np.float64)
    w_arr = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef double[::1] q = q_arr
    cdef double[::1] w = w_arr
    cdef Py_ssize_t n = q.shape[0]
    if w.shape[0] != n - 1:
        raise ValueError("face drift array must have length n-1")

    qn_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] qn = qn_arr
    bp_arr = np.empty(n - 1, dtype=np.float64)
    bm_arr = np.empty(n - 1, dtype=np.float64)
    cdef double[::1] Bp = bp_arr
    cdef double[::1] Bm = bm_arr

    cdef double inv_h2 = 1.0 / (h * h)
    cdef double c = dt * inv_h2
    cdef double rate_max = 0.0
    cdef double P, rate, stay
    cdef Py_ssize_t i
    with nogil:
        for i in range(n - 1):
            P = w[i] * h
            Bp[i] = _bern(P)
            Bm[i] = _bern(-P)
        for i in range(n):
            rate = 0.0
            if i < n - 1:
                rate += Bm[i] * inv_h2
            if i > 0:
                rate += Bp[i - 1] * inv_h2
            if rate > rate_max:
                rate_max = rate
            stay = q[i] * (1.0 - dt * rate)
            if i < n - 1:
                stay += c * Bp[i] * q[i + 1]
            if i > 0:
                stay += c * Bm[i - 1] * q[i - 1]
            qn[i] = stay
    return qn_arr, rate_max


def fp_step_2d(q_in, wx_in, wy_in, double dt, double hx, double hy):
    q_arr = np.ascontiguousarray(q_in, dtype=np.float64)
    wx_arr = np.ascontiguousarray(wx_in, dtype=np.float64)
    wy_arr = np.ascontiguousarray(wy_in, dtype=np.float64)
    cdef double[:, ::1] q = q_arr
    cdef double[:, ::1] wx = wx_arr
    cdef double[:, ::1] wy = wy_arr
    cdef Py_ssize_t n0 = q.shape[0]
    cdef Py_ssize_t n1 = q.shape[1]
    if wx.shape[0] != n0 - 1 or wx.shape[1] != n1:
        raise ValueError("wx must have shape (n0-1, n1)")
    if wy.shape[0] != n0 or wy.shape[1] != n1 - 1:
        raise ValueError("wy must have shape (n0, n1-1)")

    qn_arr = np.empty((n0, n1), dtype=np.float64)
    cdef double[:, ::1] qn = qn_arr
    bpx_arr = np.empty((n0 - 1, n1), dtype=np.float64)
    bmx_arr = np.empty((n0 - 1, n1), dtype=np.float64)
    bpy_arr = np.empty((n0, n1 - 1), dtype=np.float64)
    bmy_arr = np.empty((n0, n1 - 1), dtype=np.float64)
    cdef double[:, ::1] Bpx = bpx_arr
    cdef double[:, ::1] Bmx = bmx_arr
    cdef double[:, ::1] Bpy = bpy_arr
    cdef double[:, ::1] Bmy = bmy_arr

    cdef double inv_hx2 = 1.0 / (hx * hx)
    cdef double inv_hy2 = 1.0 / (hy * hy)
    cdef double cx = dt * inv_hx2
    cdef double cy = dt * inv_hy2
    cdef double rate_max = 0.0
    cdef double P, rate, stay
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n0 - 1):
            for j in range(n1):
                P = wx[i, j] * hx
                Bpx[i, j] = _bern(P)
                Bmx[i, j] = _bern(-P)
        for i in range(n0):
            for j in range(n1 - 1):
                P = wy[i, j] * hy
                Bpy[i, j] = _bern(P)
                Bmy[i, j] = _bern(-P)
        for i in range(n0):
            for j in range(n1):
                rate = 0.0
                if i < n0 - 1:
                    rate += Bmx[i, j] * inv_hx2
                if i > 0:
                    rate += Bpx[i - 1, j] * inv_hx2
                if j < n1 - 1:
                    rate += Bmy[i, j] * inv_hy2
                if j > 0:
                    rate += Bpy[i, j - 1] * inv_hy2
                if rate > rate_max:
                    rate_max = rate
                stay = q[i, j] * (1.0 - dt * rate)
                if i < n0 - 1:
                    stay += cx * Bpx[i, j] * q[i + 1, j]
                if i > 0:
                    stay += cx * Bmx[i - 1, j] * q[i - 1, j]
                if j < n1 - 1:
                    stay += cy * Bpy[i, j] * q[i, j + 1]
                if j > 0:
                    stay += cy * Bmy[i, j - 1] * q[i, j - 1]
                qn[i, j] = stay
    return qn_arr, rate_max
