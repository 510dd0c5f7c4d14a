"""Pure-numpy reference kernels.

These mirror the compiled extension in ``_kernels.pyx`` operation for
operation; the backend selector picks whichever is available. Integer
results (Philox bits) are bit-identical across the two implementations,
floating-point results agree to rounding.
"""

from __future__ import annotations

import numpy as np

IMPLEMENTATION = "python"

# Philox-4x32-10 round and key-schedule constants.
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = 0xFFFFFFFF

# Key increments for rounds 1..9 (round 0 uses the unbumped key).
_ROUND_KEYS = [((r * _W0) & _MASK32, (r * _W1) & _MASK32) for r in range(10)]


def philox_bits(seed: int, step: int, streams: np.ndarray, blocks: int) -> np.ndarray:
    """Counter-based random bits for one update step.

    Returns a (n_streams, 2*blocks) uint64 array; entry [i, 2b+j] is the
    j-th 64-bit word of the Philox-4x32-10 output at counter
    (block=b, stream=streams[i], step=step) under key ``seed``. A pure
    function of its arguments: any particle/block can be recomputed in
    isolation, which is what makes chunked and parallel execution
    reproducible.
    """
    streams = np.ascontiguousarray(streams, dtype=np.uint64)
    n = streams.shape[0]
    k0_base = seed & _MASK32
    k1_base = (seed >> 32) & _MASK32

    block_idx = np.arange(blocks, dtype=np.uint32)
    c0 = np.broadcast_to(block_idx, (n, blocks)).reshape(-1)
    c1 = np.broadcast_to((streams & np.uint64(_MASK32)).astype(np.uint32)[:, None], (n, blocks)).reshape(-1)
    c2 = np.broadcast_to((streams >> np.uint64(32)).astype(np.uint32)[:, None], (n, blocks)).reshape(-1)
    c3 = np.full(n * blocks, step & _MASK32, dtype=np.uint32)

    for dk0, dk1 in _ROUND_KEYS:
        k0 = np.uint32((k0_base + dk0) & _MASK32)
        k1 = np.uint32((k1_base + dk1) & _MASK32)
        p0 = _M0 * c0.astype(np.uint64)
        p1 = _M1 * c2.astype(np.uint64)
        hi0 = (p0 >> np.uint64(32)).astype(np.uint32)
        lo0 = p0.astype(np.uint32)
        hi1 = (p1 >> np.uint64(32)).astype(np.uint32)
        lo1 = p1.astype(np.uint32)
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0

    out = np.empty((n * blocks, 2), dtype=np.uint64)
    out[:, 0] = (c0.astype(np.uint64) << np.uint64(32)) | c1.astype(np.uint64)
    out[:, 1] = (c2.astype(np.uint64) << np.uint64(32)) | c3.astype(np.uint64)
    return out.reshape(n, 2 * blocks)


def _bernoulli(z: np.ndarray) -> np.ndarray:
    """B(z) = z / (e^z - 1), the exponential-fitting weight.

    Series branch below |z| = 1e-5 avoids the 0/0; expm1 keeps the
    quotient accurate for small and large |z| alike.
    """
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-5
    zs = np.where(small, 0.0, z)
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.where(small, 1.0 - 0.5 * z + z * z / 12.0, zs / np.expm1(zs))
    return ratio


def fp_step_1d(q: np.ndarray, w: np.ndarray, dt: float, h: float):
    """One exponentially fitted finite-volume step on a 1-d grid.

    ``w`` holds drift values at the n-1 interior faces; boundary faces
    carry zero flux. Returns (q_new, rate_max) where 1/rate_max is the
    largest dt keeping every cell's update coefficient nonnegative. The
    update is assembled as q*stay + inflows, all terms nonnegative, so
    positivity is exact in floating point whenever dt*rate_max <= 1.
    """
    P = w * h
    Bp = _bernoulli(P)
    Bm = _bernoulli(-P)
    inv_h2 = 1.0 / (h * h)

    rate = np.zeros_like(q)
    rate[:-1] += Bm * inv_h2
    rate[1:] += Bp * inv_h2
    rate_max = float(rate.max())

    c = dt * inv_h2
    qn = q * (1.0 - dt * rate)
    qn[:-1] += c * Bp * q[1:]
    qn[1:] += c * Bm * q[:-1]
    return qn, rate_max


def fp_step_2d(q: np.ndarray, wx: np.ndarray, wy: np.ndarray, dt: float, hx: float, hy: float):
    """2-d analogue of :func:`fp_step_1d` on a tensor grid.

    ``wx`` has shape (n0-1, n1) (faces along axis 0), ``wy`` has shape
    (n0, n1-1).
    """
    Px = wx * hx
    Bpx = _bernoulli(Px)
    Bmx = _bernoulli(-Px)
    Py = wy * hy
    Bpy = _bernoulli(Py)
    Bmy = _bernoulli(-Py)
    inv_hx2 = 1.0 / (hx * hx)
    inv_hy2 = 1.0 / (hy * hy)

    rate = np.zeros_like(q)
    rate[:-1, :] += Bmx * inv_hx2
    rate[1:, :] += Bpx * inv_hx2
    rate[:, :-1] += Bmy * inv_hy2
    rate[:, 1:] += Bpy * inv_hy2
    rate_max = float(rate.max())

    qn = q * (1.0 - dt * rate)
    cx = dt * inv_hx2
    cy = dt * inv_hy2
    qn[:-1, :] += cx * Bpx * q[1:, :]
    qn[1:, :] += cx * Bmx * q[:-1, :]
    qn[:, :-1] += cy * Bpy * q[:, 1:]
    qn[:, 1:] += cy * Bmy * q[:, :-1]
    return qn, rate_max
