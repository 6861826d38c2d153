"""Compiled AMS loops.

One replication is a strictly sequential loop; the batch driver runs
replications in parallel with ``prange``, each on its own ``(seed, rep)``
substream, and writes results into per-replication slots so that the output
does not depend on the thread count.

Particles are kept in arrays sorted by ``(level, index)``.  Each conditional
draw consumes exactly one uniform.  Sampling formulas mirror
``amsplit.models`` operation for operation.
"""

import math
import os

import numba
import numpy as np
from numba import njit, prange

# the default layer probes TBB first and warns when it is too old; an
# explicit NUMBA_THREADING_LAYER still wins
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

from .rng import new_state, next_uniform

STATUS_TARGET = 0
STATUS_RUNAWAY = 1
STATUS_LIMIT = 2

_FNV_OFFSET = np.uint64(0xCBF29CE484222325)
_FNV_PRIME = np.uint64(0x100000001B3)


@njit(cache=True, inline="always")
def draw(code, param, z, u, a):
    """Quantile of ``L(X | X > z)`` at ``u`` for the model with ``code``."""
    if code == 0:
        return z - math.log1p(-u)
    if code == 1:
        s = param * math.log1p(z) - math.log1p(-u)
        return math.expm1(s / param)
    if code == 2:
        s = z**param - math.log1p(-u)
        return s ** (1.0 / param)
    # committor toy with the Pareto tail substituted at and above a
    zeff = max(z, param)
    v = 1.0 - u
    capped = min(zeff / v, 1.0)
    if capped >= a:
        u_aux = v * a / zeff
        return a / u_aux
    return capped


@njit(cache=True, inline="always")
def _insert(levels, idx, count, value, index):
    lo = 0
    hi = count
    while lo < hi:
        mid = (lo + hi) >> 1
        if levels[mid] < value or (levels[mid] == value and idx[mid] < index):
            lo = mid + 1
        else:
            hi = mid
    for t in range(count, lo, -1):
        levels[t] = levels[t - 1]
        idx[t] = idx[t - 1]
    levels[lo] = value
    idx[lo] = index


@njit(cache=True, inline="always")
def _mix(digest, value):
    for shift in range(0, 64, 8):
        digest ^= np.uint64((value >> shift) & 0xFF)
        digest *= _FNV_PRIME
    return digest


@njit(cache=True)
def _run(code, param, x, a, n, k, max_iter, state, levels, idx, killed):
    """Run one replication in place; returns ``(J, count_ge_a, digest, status)``."""
    for i in range(n):
        u = next_uniform(state)
        _insert(levels, idx, i, draw(code, param, x, u, a), i)
    z = levels[k - 1]
    j_count = 0
    digest = _FNV_OFFSET
    status = STATUS_TARGET
    while z < a:
        if j_count >= max_iter:
            status = STATUS_RUNAWAY
            break
        for ell in range(k):
            killed[ell] = idx[ell]
            digest = _mix(digest, idx[ell])
        for t in range(n - k):
            levels[t] = levels[t + k]
            idx[t] = idx[t + k]
        count = n - k
        for ell in range(k):
            u = next_uniform(state)
            _insert(levels, idx, count, draw(code, param, z, u, a), killed[ell])
            count += 1
        j_count += 1
        z = levels[k - 1]
    count_ge = 0
    for t in range(n - 1, -1, -1):
        if levels[t] >= a:
            count_ge += 1
        else:
            break
    return j_count, count_ge, digest, status


@njit(cache=True)
def run_one(code, param, x, a, n, k, max_iter, seed, rep, trace_cap):
    """Single replication with its level trace and kill order.

    ``trace`` holds ``Z^0, ..., Z^(J+1)``; ``kills`` lists the killed
    particle indices, ``k`` per iteration.  Stops without reaching ``a``
    after ``max_iter`` iterations (status 1).
    """
    state = new_state(seed, rep)
    levels = np.empty(n)
    idx = np.empty(n, dtype=np.int64)
    killed = np.empty(k, dtype=np.int64)
    trace = np.empty(trace_cap)
    kills = np.empty(trace_cap * k, dtype=np.int64)

    for i in range(n):
        u = next_uniform(state)
        _insert(levels, idx, i, draw(code, param, x, u, a), i)
    trace[0] = x
    trace[1] = levels[k - 1]
    z = levels[k - 1]
    j_count = 0
    digest = _FNV_OFFSET
    status = STATUS_TARGET
    while z < a:
        if j_count >= max_iter:
            status = STATUS_RUNAWAY
            break
        if j_count + 2 >= trace.size:
            grown = np.empty(2 * trace.size)
            grown[: trace.size] = trace
            trace = grown
            grown_k = np.empty(2 * kills.size, dtype=np.int64)
            grown_k[: kills.size] = kills
            kills = grown_k
        for ell in range(k):
            killed[ell] = idx[ell]
            kills[j_count * k + ell] = idx[ell]
            digest = _mix(digest, idx[ell])
        for t in range(n - k):
            levels[t] = levels[t + k]
            idx[t] = idx[t + k]
        count = n - k
        for ell in range(k):
            u = next_uniform(state)
            _insert(levels, idx, count, draw(code, param, z, u, a), killed[ell])
            count += 1
        j_count += 1
        z = levels[k - 1]
        trace[j_count + 1] = z
    count_ge = 0
    for t in range(n - 1, -1, -1):
        if levels[t] >= a:
            count_ge += 1
        else:
            break
    return (
        j_count,
        count_ge,
        digest,
        status,
        trace[: j_count + 2].copy(),
        kills[: j_count * k].copy(),
        levels,
        idx,
    )


@njit(cache=True, parallel=True)
def run_batch(code, param, x, a, n, k, max_iter, seed, rep0, m):
    """``m`` replications on substreams ``rep0, ..., rep0 + m - 1``."""
    j_out = np.empty(m, dtype=np.int64)
    c_out = np.empty(m, dtype=np.int64)
    d_out = np.empty(m, dtype=np.uint64)
    s_out = np.empty(m, dtype=np.int64)
    for r in prange(m):
        state = new_state(seed, rep0 + np.uint64(r))
        levels = np.empty(n)
        idx = np.empty(n, dtype=np.int64)
        killed = np.empty(k, dtype=np.int64)
        jc, cg, dg, st = _run(code, param, x, a, n, k, max_iter, state, levels, idx, killed)
        j_out[r] = jc
        c_out[r] = cg
        d_out[r] = dg
        s_out[r] = st
    return j_out, c_out, d_out, s_out


@njit(cache=True, parallel=True)
def evolve_batch(code, param, x, n, k, n_iter, seed, rep0, m):
    """Run ``n_iter`` iterations with no target level.

    Returns the levels ``Z^0..Z^(n_iter+1)`` per replication and the
    particles ``X^(n_iter)`` in original index order.
    """
    levels_out = np.empty((m, n_iter + 2))
    particles_out = np.empty((m, n))
    for r in prange(m):
        state = new_state(seed, rep0 + np.uint64(r))
        levels = np.empty(n)
        idx = np.empty(n, dtype=np.int64)
        killed = np.empty(k, dtype=np.int64)
        for i in range(n):
            u = next_uniform(state)
            _insert(levels, idx, i, draw(code, param, x, u, np.inf), i)
        levels_out[r, 0] = x
        z = levels[k - 1]
        levels_out[r, 1] = z
        for j in range(n_iter):
            for ell in range(k):
                killed[ell] = idx[ell]
            for t in range(n - k):
                levels[t] = levels[t + k]
                idx[t] = idx[t + k]
            count = n - k
            for ell in range(k):
                u = next_uniform(state)
                _insert(levels, idx, count, draw(code, param, z, u, np.inf), killed[ell])
                count += 1
            z = levels[k - 1]
            levels_out[r, j + 2] = z
        for t in range(n):
            particles_out[r, idx[t]] = levels[t]
    return levels_out, particles_out


@njit(cache=True, parallel=True)
def direct_batch(code, param, a, m, seed, rep0, chunks):
    """Count draws ``X >= a`` among ``m`` unconditional samples, split into chunks."""
    per = (m + chunks - 1) // chunks
    hits = np.zeros(chunks, dtype=np.int64)
    for c in prange(chunks):
        state = new_state(seed, rep0 + np.uint64(c))
        start = c * per
        stop = min(m, start + per)
        h = 0
        for _ in range(start, stop):
            u = next_uniform(state)
            if draw(code, param, 0.0, u, a) >= a:
                h += 1
        hits[c] = h
    return hits
