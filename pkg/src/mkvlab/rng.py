"""Counter-based random streams (Philox4x32-10).

Every draw made by this package is a pure function of a 64-bit seed and a
four-word counter ``(slot, item, step, stream)``.  Nothing is stateful, so
results are identical for any thread count, chunking, or evaluation order,
and two coupled simulations can consume the very same Wiener increments by
construction.

Stream tags partition the counter space between consumers (increments,
initial draws, the regularity probes, ...).  Normal variates are produced by
the inverse CDF so each variate consumes exactly one counter block.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

__all__ = [
    "philox4x32",
    "uniform_block",
    "normal_block",
    "step_uniforms",
    "step_normals",
    "probe_uniforms",
    "STREAM_INCREMENTS",
    "STREAM_INITIAL",
    "STREAM_MODULUS",
    "STREAM_ELLIPTICITY",
    "STREAM_LIPSCHITZ",
    "STREAM_BOUNDS",
    "STREAM_MEASURES",
    "STREAM_SYNTH",
]

# Stream tags (counter word 3).  Keep distinct per consumer.
STREAM_INCREMENTS = 0  # Wiener increments of the particle solver
STREAM_INITIAL = 1  # initial-condition draws
STREAM_MODULUS = 2  # drift-modulus probes
STREAM_ELLIPTICITY = 3  # ellipticity-floor probes
STREAM_LIPSCHITZ = 4  # Lipschitz-quotient probes (plus axis offset)
STREAM_CONTINUITY = 5  # (t, x)-continuity probes of the diffusion square
STREAM_BOUNDS = 8  # boundedness spot checks
STREAM_MEASURES = 9  # random empirical measures for probing
STREAM_SYNTH = 15  # synthetic traces in tests/benchmarks

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_LO32 = np.uint64(0xFFFFFFFF)


def philox4x32(c0, c1, c2, c3, key0, key1, rounds: int = 10):
    """Run the Philox4x32 block cipher on arrays of counter words.

    All counter arguments are broadcast against each other; the two key words
    are scalars.  Returns the four 32-bit output words as uint32 arrays.
    """
    x0, x1, x2, x3 = np.broadcast_arrays(
        np.asarray(c0, dtype=np.uint64),
        np.asarray(c1, dtype=np.uint64),
        np.asarray(c2, dtype=np.uint64),
        np.asarray(c3, dtype=np.uint64),
    )
    # Counter words are 32-bit by contract; mask so uint64 products cannot wrap.
    x0 = x0 & _LO32
    x1 = x1 & _LO32
    x2 = x2 & _LO32
    x3 = x3 & _LO32
    k0 = np.uint64(np.uint32(key0))
    k1 = np.uint64(np.uint32(key1))
    w0 = np.uint64(_W0)
    w1 = np.uint64(_W1)
    for _ in range(rounds):
        p0 = _M0 * x0
        p1 = _M1 * x2
        hi0 = p0 >> np.uint64(32)
        lo0 = p0 & _LO32
        hi1 = p1 >> np.uint64(32)
        lo1 = p1 & _LO32
        y0 = hi1 ^ x1 ^ k0
        y2 = hi0 ^ x3 ^ k1
        x0, x1, x2, x3 = y0, lo1, y2, lo0
        k0 = (k0 + w0) & _LO32
        k1 = (k1 + w1) & _LO32
    return (
        x0.astype(np.uint32),
        x1.astype(np.uint32),
        x2.astype(np.uint32),
        x3.astype(np.uint32),
    )


def _split_key(seed: int) -> tuple[np.uint32, np.uint32]:
    s = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    return np.uint32(s & _LO32), np.uint32(s >> np.uint64(32))


def uniform_block(seed: int, stream: int, step, item, slot) -> np.ndarray:
    """Uniform(0, 1) double for each counter (slot, item, step, stream).

    Uses the top 53 of the 64 bits formed by the first two output words, so
    the result is never exactly 0 or 1.
    """
    key0, key1 = _split_key(seed)
    o0, o1, _, _ = philox4x32(slot, item, step, stream, key0, key1)
    bits = (o0.astype(np.uint64) << np.uint64(32)) | o1.astype(np.uint64)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normal_block(seed: int, stream: int, step, item, slot) -> np.ndarray:
    """Standard normal via the inverse CDF of :func:`uniform_block`."""
    return ndtri(uniform_block(seed, stream, step, item, slot))


def step_uniforms(seed: int, stream: int, step: int, n_items: int, width: int) -> np.ndarray:
    """(n_items, width) uniforms for one time step / probe batch."""
    item = np.arange(n_items, dtype=np.uint64)[:, None]
    slot = np.arange(width, dtype=np.uint64)[None, :]
    return uniform_block(seed, stream, np.uint64(step), item, slot)


def step_normals(seed: int, stream: int, step: int, n_items: int, width: int) -> np.ndarray:
    """(n_items, width) standard normals, one per (item, step, slot) counter."""
    return ndtri(step_uniforms(seed, stream, step, n_items, width))


def probe_uniforms(seed: int, stream: int, probes, n_slots: int, step: int = 0) -> np.ndarray:
    """(len(probes), n_slots) uniforms indexed by absolute probe number.

    Probe ``p`` always receives the same numbers no matter how many probes a
    plan requests, which makes extrema over growing probe sets monotone.
    """
    item = np.asarray(probes, dtype=np.uint64)[:, None]
    slot = np.arange(n_slots, dtype=np.uint64)[None, :]
    return uniform_block(seed, stream, np.uint64(step), item, slot)
