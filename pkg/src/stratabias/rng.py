"""Counter-based random numbers for reproducible, partition-independent simulation.

Every random draw in a simulated trial is addressed by (seed, subject id,
draw index) and produced by the Philox-4x32-10 block cipher, so a subject's
draws never depend on how many subjects are generated around it, in what
order, or on how work is split across chunks or threads.  Generating subjects
0..n-1 in one call, in two halves, or one at a time gives bit-identical
output.

The implementation is vectorized numpy and round-for-round follows the
published Philox-4x32 construction (verified against its known-answer
vectors in tests/test_rng.py).  Each 128-bit block yields two 53-bit
uniforms in the open interval (0, 1); normals are obtained downstream by
inverse-CDF so that every draw is a monotone function of its uniform.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_LO32 = np.uint64(0xFFFFFFFF)
_ROUNDS = 10

# 2^-53; uniforms are (bits53 + 0.5) * 2^-53, always inside (0, 1)
_INV53 = float(np.ldexp(1.0, -53))


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Run the Philox-4x32-10 bijection on vectors of counter words.

    The counter words are uint32 arrays (or scalars) of a common
    broadcast shape; the two key words are integer scalars.  Returns
    the four output words as uint32 arrays.  The per-round key schedule
    is precomputed in exact integer arithmetic (the bumps wrap mod 2^32).
    """
    c0 = np.asarray(c0, dtype=np.uint32)
    c1 = np.asarray(c1, dtype=np.uint32)
    c2 = np.asarray(c2, dtype=np.uint32)
    c3 = np.asarray(c3, dtype=np.uint32)
    k0 = int(k0)
    k1 = int(k1)
    for r in range(_ROUNDS):
        rk0 = np.uint32((k0 + r * _W0) & 0xFFFFFFFF)
        rk1 = np.uint32((k1 + r * _W1) & 0xFFFFFFFF)
        p0 = _M0 * c0.astype(np.uint64)
        p1 = _M1 * c2.astype(np.uint64)
        hi0 = (p0 >> np.uint64(32)).astype(np.uint32)
        lo0 = (p0 & _LO32).astype(np.uint32)
        hi1 = (p1 >> np.uint64(32)).astype(np.uint32)
        lo1 = (p1 & _LO32).astype(np.uint32)
        c0, c1, c2, c3 = hi1 ^ c1 ^ rk0, lo1, hi0 ^ c3 ^ rk1, lo0
    return c0, c1, c2, c3


def _pair_to_unit(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Combine two 32-bit words into one double uniform on (0, 1)."""
    bits = (a.astype(np.uint64) << np.uint64(21)) | (b.astype(np.uint64) >> np.uint64(11))
    return (bits.astype(np.float64) + 0.5) * _INV53


def uniform_matrix(seed: int, ids: np.ndarray, n_draws: int) -> np.ndarray:
    """Uniform draws for a batch of subjects, addressed by (seed, id, draw).

    Parameters
    ----------
    seed : int
        64-bit stream seed (the Philox key).
    ids : array of int64
        Subject identifiers; any values in [0, 2^64), any order.
    n_draws : int
        Number of draws per subject.

    Returns
    -------
    (len(ids), n_draws) float64 array with entries in the open interval
    (0, 1).  Entry [i, d] depends only on (seed, ids[i], d).
    """
    ids = np.asarray(ids)
    n = ids.shape[0]
    seed = int(seed)
    k0 = np.uint32(seed & 0xFFFFFFFF)
    k1 = np.uint32((seed >> 32) & 0xFFFFFFFF)
    id_lo = (ids.astype(np.uint64) & _LO32).astype(np.uint32)
    id_hi = (ids.astype(np.uint64) >> np.uint64(32)).astype(np.uint32)
    zero = np.zeros(n, dtype=np.uint32)

    out = np.empty((n, n_draws))
    n_blocks = (n_draws + 1) // 2
    for j in range(n_blocks):
        block = np.full(n, j, dtype=np.uint32)
        w0, w1, w2, w3 = philox4x32(block, id_lo, id_hi, zero, k0, k1)
        out[:, 2 * j] = _pair_to_unit(w0, w1)
        if 2 * j + 1 < n_draws:
            out[:, 2 * j + 1] = _pair_to_unit(w2, w3)
    return out
