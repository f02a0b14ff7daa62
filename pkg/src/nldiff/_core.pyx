# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: lattice cross-correlation and compound-Poisson walks.

Both mirror the numpy versions in ``_pure`` operation for operation; the
walk in particular must stay bit-identical to its fallback.
"""
from libc.stdint cimport uint64_t, int64_t

import numpy as np


def correlate(const double[:, ::1] ext, const double[::1] w, Py_ssize_t start,
              double[:, ::1] out):
    """out[b, i] = sum_j w[j] * ext[b, start + i + j], summed in ascending j."""
    cdef Py_ssize_t nb = out.shape[0], nout = out.shape[1], nw = w.shape[0]
    cdef Py_ssize_t b, i, j
    cdef double acc
    if ext.shape[0] != nb or start < 0 or start + nout + nw - 1 > ext.shape[1]:
        raise ValueError("correlation window out of range")
    with nogil:
        for b in range(nb):
            for i in range(nout):
                acc = 0.0
                for j in range(nw):
                    acc = acc + w[j] * ext[b, start + i + j]
                out[b, i] = acc


cdef inline uint64_t splitmix64(uint64_t x) nogil:
    x = x + <uint64_t>0x9E3779B97F4A7C15ULL
    x = (x ^ (x >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    x = (x ^ (x >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return x ^ (x >> 31)


cdef inline double uniform(uint64_t key, uint64_t draw) nogil:
    return <double>(splitmix64(key + draw) >> 11) * (1.0 / 9007199254740992.0)


cdef inline Py_ssize_t search_right(const double* cdf, Py_ssize_t m, double u) nogil:
    # first index with cdf[idx] > u, clamped to the last entry; branch-free halving
    cdef const double* b = cdf
    cdef Py_ssize_t n = m, half, idx
    while n > 1:
        half = n >> 1
        b = b + half if b[half] <= u else b
        n -= half
    idx = (b - cdf) + (b[0] <= u)
    return idx if idx < m else m - 1


def walk(uint64_t seed, int64_t first, int64_t count,
         const double[::1] start_cdf, const double[::1] poisson_cdf,
         const double[::1] jump_cdf, int64_t J, int64_t n, bint absorbing,
         bint reflect):
    """Simulate particles ``first .. first+count-1``.

    Returns ``(position, alive, jumps)``: final closure-lattice index, survival
    flag and drawn Poisson count per particle.
    """
    pos_a = np.empty(count, dtype=np.int64)
    alive_a = np.ones(count, dtype=np.uint8)
    jumps_a = np.empty(count, dtype=np.int64)
    cdef int64_t[::1] pos = pos_a
    cdef unsigned char[::1] alive = alive_a
    cdef int64_t[::1] jumps = jumps_a
    cdef int64_t p, r, nj, x, step
    cdef uint64_t key
    # raw pointers: memoryview arguments would be acquired on every call
    cdef const double* sc = &start_cdf[0]
    cdef const double* pc = &poisson_cdf[0]
    cdef const double* jc = &jump_cdf[0]
    cdef Py_ssize_t ns = start_cdf.shape[0], npc = poisson_cdf.shape[0], njc = jump_cdf.shape[0]
    with nogil:
        for p in range(count):
            key = splitmix64(seed ^ splitmix64(<uint64_t>(first + p)))
            x = search_right(sc, ns, uniform(key, 0))
            nj = search_right(pc, npc, uniform(key, 1))
            jumps[p] = nj
            for r in range(nj):
                step = search_right(jc, njc, uniform(key, 2 + r)) - J
                if reflect:
                    step = -step
                x = x + step
                if absorbing and (x <= 0 or x >= n):
                    alive[p] = 0
                    break
            pos[p] = x
    return pos_a, alive_a, jumps_a
