"""Counter-based uniform streams.

Every AMS replication owns one stream, addressed by ``(seed, rep)``.  The
generator is Philox4x64-10 keyed with ``key = (seed, rep)``, i.e. exactly the
stream produced by ``numpy.random.Philox(key=seed | rep << 64)``.  numpy's
implementation is the reference; the numba version below exists because the
AMS kernels need to draw uniforms from compiled code, and it is tested to be
bit-identical to numpy.

Raw 64-bit outputs are mapped to the open interval (0, 1) by taking the top
52 bits and adding half a step, so a conditional quantile is never evaluated
at 0 or 1.  With 53 bits the largest value, ``1 - 2^-54``, rounds to 1.
"""

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S12 = np.uint64(12)
_STEP = 2.0**-52
_HALF_STEP = 0.5 * _STEP

# stream state layout: [key0, key1, block_counter, buffer_pos, b0, b1, b2, b3]
STATE_SIZE = 8


def philox_key(seed, rep):
    """Integer key understood by ``numpy.random.Philox(key=...)``."""
    if not 0 <= seed <= MASK64 or not 0 <= rep <= MASK64:
        raise ValueError("seed and rep must be unsigned 64-bit integers")
    return seed | (rep << 64)


def raw_to_uniform(raw):
    """Map raw uint64 outputs to uniforms in (0, 1)."""
    raw = np.asarray(raw, dtype=np.uint64)
    return (raw >> _S12).astype(np.float64) * _STEP + _HALF_STEP


class UniformStream:
    """Sequential reader over the ``(seed, rep)`` stream, backed by numpy.

    Parameters
    ----------
    seed, rep : int
        Unsigned 64-bit stream address.
    block : int
        Number of uniforms fetched from the bit generator at a time.
    """

    def __init__(self, seed, rep=0, block=256):
        self.seed = int(seed)
        self.rep = int(rep)
        self._bitgen = np.random.Philox(key=philox_key(self.seed, self.rep))
        self._block = block
        self._buf = np.empty(0)
        self._pos = 0
        self.consumed = 0

    def next(self):
        if self._pos == self._buf.size:
            self._buf = raw_to_uniform(self._bitgen.random_raw(self._block))
            self._pos = 0
        u = float(self._buf[self._pos])
        self._pos += 1
        self.consumed += 1
        return u

    def take(self, count):
        return np.array([self.next() for _ in range(count)])


def uniforms(seed, rep, count):
    """First ``count`` uniforms of the ``(seed, rep)`` stream."""
    bitgen = np.random.Philox(key=philox_key(int(seed), int(rep)))
    return raw_to_uniform(bitgen.random_raw(count))


def generator(seed, rep=0):
    """A numpy Generator on the ``(seed, rep)`` stream, for vectorised draws."""
    return np.random.Generator(np.random.Philox(key=philox_key(int(seed), int(rep))))


@njit(cache=True, inline="always")
def _mulhilo(a, b):
    lo = a * b
    a_lo = a & _LO32
    a_hi = a >> _S32
    b_lo = b & _LO32
    b_hi = b >> _S32
    p0 = a_lo * b_lo
    p1 = a_lo * b_hi
    p2 = a_hi * b_lo
    p3 = a_hi * b_hi
    mid = (p0 >> _S32) + (p1 & _LO32) + (p2 & _LO32)
    hi = p3 + (p1 >> _S32) + (p2 >> _S32) + (mid >> _S32)
    return hi, lo


@njit(cache=True)
def _refill(state):
    c0 = state[2] + np.uint64(1)
    state[2] = c0
    c1 = np.uint64(0)
    c2 = np.uint64(0)
    c3 = np.uint64(0)
    k0 = state[0]
    k1 = state[1]
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
    state[4] = c0
    state[5] = c1
    state[6] = c2
    state[7] = c3
    state[3] = np.uint64(0)


@njit(cache=True)
def new_state(seed, rep):
    state = np.zeros(STATE_SIZE, dtype=np.uint64)
    state[0] = np.uint64(seed)
    state[1] = np.uint64(rep)
    state[3] = np.uint64(4)
    return state


@njit(cache=True)
def next_raw(state):
    if state[3] >= np.uint64(4):
        _refill(state)
    pos = state[3]
    out = state[np.int64(4) + np.int64(pos)]
    state[3] = pos + np.uint64(1)
    return out


@njit(cache=True)
def next_uniform(state):
    return np.float64(next_raw(state) >> _S12) * _STEP + _HALF_STEP


@njit(cache=True)
def fill_raw(seed, rep, count):
    """Compiled counterpart of ``Philox(key=...).random_raw(count)``."""
    state = new_state(seed, rep)
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        out[i] = next_raw(state)
    return out
