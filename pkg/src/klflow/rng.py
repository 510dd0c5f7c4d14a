"""Counter-based Gaussian variates for particle simulation.

Randomness comes from the Philox-4x32-10 block cipher keyed by the run
seed. Each (step, stream) pair addresses an independent 128-bit counter
block, so the normal draws for any particle at any step are a pure
function of ``(seed, step, stream)``. Trajectories are therefore
reproducible bit-for-bit regardless of how particles are batched across
workers, and a run can be resumed from any step without replaying the
RNG history.

The uint64 -> float64 conversion and the Box-Muller transform live here,
in numpy, for both kernel backends; only the raw bit generation is
backend-specific. This keeps the two backends bit-identical.
"""

from __future__ import annotations

import math

import numpy as np

from ._backend import philox_bits

__all__ = ["standard_normals", "uniforms"]

_INV_2_53 = 2.0 ** -53


def _bits_to_open_closed(bits: np.ndarray) -> np.ndarray:
    """Map uint64 -> (0, 1]: safe as a log argument."""
    return ((bits >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * _INV_2_53


def _bits_to_closed_open(bits: np.ndarray) -> np.ndarray:
    """Map uint64 -> [0, 1)."""
    return (bits >> np.uint64(11)).astype(np.float64) * _INV_2_53


def uniforms(seed: int, step: int, streams: np.ndarray, count: int) -> np.ndarray:
    """Per-stream uniforms in (0, 1], shape ``(len(streams), count)``."""
    # each Philox block carries two uint64 words, hence two uniforms
    blocks = (count + 1) // 2
    bits = philox_bits(seed, step, np.asarray(streams, dtype=np.uint64), blocks)
    return _bits_to_open_closed(bits)[:, :count]

def standard_normals(
    seed: int, step: int, streams: np.ndarray, dim: int
) -> np.ndarray:
    """Standard normal draws, shape ``(len(streams), dim)``.

    Each Philox block yields two uint64 words, which Box-Muller turns
    into two normals; ``ceil(dim / 2)`` blocks per stream. The pairing
    (word 0 -> radius, word 1 -> angle) is part of the stream contract:
    changing it changes every trajectory.
    """
    streams = np.asarray(streams, dtype=np.uint64)
    blocks = (dim + 1) // 2
    bits = philox_bits(seed, step, streams, blocks)
    b1 = bits[:, 0::2]
    b2 = bits[:, 1::2]
    u1 = _bits_to_open_closed(b1)
    u2 = _bits_to_closed_open(b2)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = (2.0 * math.pi) * u2
    z = np.empty((streams.shape[0], 2 * blocks), dtype=np.float64)
    z[:, 0::2] = r * np.cos(theta)
    z[:, 1::2] = r * np.sin(theta)
    return z[:, :dim]
