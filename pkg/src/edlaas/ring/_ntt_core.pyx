# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled negacyclic NTT and residue arithmetic.

Every function works on C-contiguous uint64 arrays of shape (k, n): one row
per prime, rows reduced modulo ``moduli[row]``. Moduli must be below 2**62.
"""
import numpy as np

from libc.stdint cimport uint64_t

cdef extern from *:
    ctypedef unsigned long long u128 "unsigned __int128"

MAX_MODULUS_BITS = 62


cdef inline uint64_t _mul_shoup(uint64_t a, uint64_t w, uint64_t wp, uint64_t q) nogil:
    cdef uint64_t hi = <uint64_t>((<u128>a * wp) >> 64)
    cdef uint64_t r = a * w - hi * q
    if r >= q:
        r -= q
    return r


cdef inline uint64_t _mulmod(uint64_t a, uint64_t b, uint64_t q) nogil:
    return <uint64_t>((<u128>a * b) % q)


def forward(uint64_t[:, ::1] a, const uint64_t[:, ::1] roots,
            const uint64_t[:, ::1] roots_shoup, const uint64_t[::1] moduli):
    """In-place Cooley-Tukey forward transform, bit-reversed output."""
    cdef Py_ssize_t k = a.shape[0], n = a.shape[1]
    cdef Py_ssize_t r, m, t, i, j, j1
    cdef uint64_t q, w, wp, u, v, x
    with nogil:
        for r in range(k):
            q = moduli[r]
            t = n
            m = 1
            while m < n:
                t >>= 1
                for i in range(m):
                    j1 = 2 * i * t
                    w = roots[r, m + i]
                    wp = roots_shoup[r, m + i]
                    for j in range(j1, j1 + t):
                        u = a[r, j]
                        v = _mul_shoup(a[r, j + t], w, wp, q)
                        x = u + v
                        a[r, j] = x - q if x >= q else x
                        a[r, j + t] = u - v if u >= v else u + q - v
                m <<= 1


def inverse(uint64_t[:, ::1] a, const uint64_t[:, ::1] roots,
            const uint64_t[:, ::1] roots_shoup, const uint64_t[::1] moduli,
            const uint64_t[::1] n_inv, const uint64_t[::1] n_inv_shoup):
    """In-place Gentleman-Sande inverse transform, bit-reversed input."""
    cdef Py_ssize_t k = a.shape[0], n = a.shape[1]
    cdef Py_ssize_t r, m, h, t, i, j, j1
    cdef uint64_t q, w, wp, u, v, x
    with nogil:
        for r in range(k):
            q = moduli[r]
            t = 1
            m = n
            while m > 1:
                h = m >> 1
                j1 = 0
                for i in range(h):
                    w = roots[r, h + i]
                    wp = roots_shoup[r, h + i]
                    for j in range(j1, j1 + t):
                        u = a[r, j]
                        v = a[r, j + t]
                        x = u + v
                        a[r, j] = x - q if x >= q else x
                        a[r, j + t] = _mul_shoup(u - v if u >= v else u + q - v, w, wp, q)
                    j1 += 2 * t
                t <<= 1
                m = h
            for j in range(n):
                a[r, j] = _mul_shoup(a[r, j], n_inv[r], n_inv_shoup[r], q)


def mul(const uint64_t[:, ::1] a, const uint64_t[:, ::1] b, const uint64_t[::1] moduli):
    cdef Py_ssize_t k = a.shape[0], n = a.shape[1], r, j
    cdef uint64_t q
    out = np.empty((k, n), dtype=np.uint64)
    cdef uint64_t[:, ::1] o = out
    with nogil:
        for r in range(k):
            q = moduli[r]
            for j in range(n):
                o[r, j] = _mulmod(a[r, j], b[r, j], q)
    return out


def mul_scalar(const uint64_t[:, ::1] a, const uint64_t[::1] scalars, const uint64_t[::1] moduli):
    """Multiply row ``r`` by ``scalars[r]`` (already reduced)."""
    cdef Py_ssize_t k = a.shape[0], n = a.shape[1], r, j
    cdef uint64_t q, w, wp
    out = np.empty((k, n), dtype=np.uint64)
    cdef uint64_t[:, ::1] o = out
    with nogil:
        for r in range(k):
            q = moduli[r]
            w = scalars[r]
            wp = <uint64_t>((<u128>w << 64) // q)
            for j in range(n):
                o[r, j] = _mul_shoup(a[r, j], w, wp, q)
    return out


def add(const uint64_t[:, ::1] a, const uint64_t[:, ::1] b, const uint64_t[::1] moduli):
    cdef Py_ssize_t k = a.shape[0], n = a.shape[1], r, j
    cdef uint64_t q, x
    out = np.empty((k, n), dtype=np.uint64)
    cdef uint64_t[:, ::1] o = out
    with nogil:
        for r in range(k):
            q = moduli[r]
            for j in range(n):
                x = a[r, j] + b[r, j]
                o[r, j] = x - q if x >= q else x
    return out


def sub(const uint64_t[:, ::1] a, const uint64_t[:, ::1] b, const uint64_t[::1] moduli):
    cdef Py_ssize_t k = a.shape[0], n = a.shape[1], r, j
    cdef uint64_t q, u, v
    out = np.empty((k, n), dtype=np.uint64)
    cdef uint64_t[:, ::1] o = out
    with nogil:
        for r in range(k):
            q = moduli[r]
            for j in range(n):
                u = a[r, j]
                v = b[r, j]
                o[r, j] = u - v if u >= v else u + q - v
    return out
