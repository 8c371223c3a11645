# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend for the hot kernels.

Bit-identical twin of ``_kernels_py``: same Philox4x64-10 streams, same
uint64 -> normal map (inverse CDF of the top 53 bits), same elementwise
update order.  See that module for the stream-addressing contract.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport uint64_t
from scipy.special.cython_special cimport ndtri

cnp.import_array()

BACKEND_NAME = "c"

cdef uint64_t M0 = 0xD2E7470EE14C6C93UL
cdef uint64_t M1 = 0xCA5A826395121157UL
cdef uint64_t W0 = 0x9E3779B97F4A7C15UL
cdef uint64_t W1 = 0xBB67AE8584CAA73BUL
cdef double U53 = 2.0 ** -53


cdef inline uint64_t mulhi(uint64_t a, uint64_t b) nogil:
    cdef uint64_t ah = a >> 32
    cdef uint64_t al = a & 0xFFFFFFFFUL
    cdef uint64_t bh = b >> 32
    cdef uint64_t bl = b & 0xFFFFFFFFUL
    cdef uint64_t t = ah * bl + ((al * bl) >> 32)
    cdef uint64_t u = al * bh + (t & 0xFFFFFFFFUL)
    return ah * bh + (t >> 32) + (u >> 32)


cdef inline void philox_once(uint64_t c0, uint64_t c1, uint64_t c2, uint64_t c3,
                             uint64_t k0, uint64_t k1, uint64_t* out) nogil:
    cdef uint64_t x0 = c0, x1 = c1, x2 = c2, x3 = c3
    cdef uint64_t hi0, lo0, hi1, lo1
    cdef int r
    for r in range(10):
        if r > 0:
            k0 = k0 + W0
            k1 = k1 + W1
        hi0 = mulhi(M0, x0)
        lo0 = M0 * x0
        hi1 = mulhi(M1, x2)
        lo1 = M1 * x2
        x0 = hi1 ^ x1 ^ k0
        x1 = lo1
        x2 = hi0 ^ x3 ^ k1
        x3 = lo0
    out[0] = x0
    out[1] = x1
    out[2] = x2
    out[3] = x3


def philox_raw_block(block, ctr2, ctr3, key0, key1):
    """Four raw 64-bit outputs per stream for one counter block, (n, 4)."""
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] c2 = np.ascontiguousarray(ctr2, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] c3 = np.ascontiguousarray(ctr3, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] k1 = np.ascontiguousarray(key1, dtype=np.uint64)
    cdef Py_ssize_t n = c2.shape[0]
    if c3.shape[0] != n or k1.shape[0] != n:
        raise ValueError("ctr2, ctr3 and key1 must have equal length")
    cdef uint64_t b = <uint64_t> block
    cdef uint64_t k0 = <uint64_t> key0
    cdef cnp.ndarray[cnp.uint64_t, ndim=2] out = np.empty((n, 4), dtype=np.uint64)
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            philox_once(b, 0, c2[i], c3[i], k0, k1[i], &out[i, 0])
    return out


def normal_block(block, ctr2, ctr3, key0, key1):
    """Four standard normals per stream for one counter block, (n, 4)."""
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] c2 = np.ascontiguousarray(ctr2, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] c3 = np.ascontiguousarray(ctr3, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] k1 = np.ascontiguousarray(key1, dtype=np.uint64)
    cdef Py_ssize_t n = c2.shape[0]
    if c3.shape[0] != n or k1.shape[0] != n:
        raise ValueError("ctr2, ctr3 and key1 must have equal length")
    cdef uint64_t b = <uint64_t> block
    cdef uint64_t k0 = <uint64_t> key0
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, 4), dtype=np.float64)
    cdef uint64_t raw[4]
    cdef Py_ssize_t i
    cdef int j
    with nogil:
        for i in range(n):
            philox_once(b, 0, c2[i], c3[i], k0, k1[i], raw)
            for j in range(4):
                out[i, j] = ndtri((<double> (raw[j] >> 11) + 0.5) * U53)
    return out


def ou_step(cnp.ndarray[cnp.float64_t, ndim=1] x,
            cnp.ndarray[cnp.float64_t, ndim=1] decay,
            cnp.ndarray[cnp.float64_t, ndim=1] scale,
            cnp.ndarray[cnp.float64_t, ndim=1] noise):
    """In-place ``x <- decay * x + scale * noise``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    cdef double t
    with nogil:
        for i in range(n):
            t = x[i] * decay[i]
            x[i] = t + scale[i] * noise[i]


def sq_diff_accum(cnp.ndarray[cnp.float64_t, ndim=1] curr,
                  cnp.ndarray[cnp.float64_t, ndim=1] prev,
                  cnp.ndarray[cnp.float64_t, ndim=1] acc,
                  cnp.ndarray[cnp.float64_t, ndim=1] comp):
    """Kahan-compensated in-place ``acc += (curr - prev)**2``."""
    cdef Py_ssize_t n = curr.shape[0]
    cdef Py_ssize_t i
    cdef double d, y, t
    with nogil:
        for i in range(n):
            d = curr[i] - prev[i]
            d = d * d
            y = d - comp[i]
            t = acc[i] + y
            comp[i] = (t - acc[i]) - y
            acc[i] = t
