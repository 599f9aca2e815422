# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``_pykernels`` exactly in signature and semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, log, sqrt
from libc.float cimport DBL_MIN

cnp.import_array()


def clip_values(z, double lo, double hi):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] src = np.ascontiguousarray(z, dtype=np.float64).reshape(-1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(src)
    cdef Py_ssize_t i, n = src.shape[0]
    cdef double v
    for i in range(n):
        v = src[i]
        if v < lo:
            v = lo
        if v > hi:
            v = hi
        out[i] = v
    return out.reshape(np.shape(z))


def clip_norm_rows(z, double c):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.array(z, dtype=np.float64, copy=True, order="C", ndmin=2)
    cdef Py_ssize_t r, j, rows = out.shape[0], cols = out.shape[1]
    cdef double acc, scale
    for r in range(rows):
        acc = 0.0
        for j in range(cols):
            acc += out[r, j] * out[r, j]
        acc = sqrt(acc)
        if acc > c:
            scale = c / acc
            for j in range(cols):
                out[r, j] *= scale
    return out.reshape(np.shape(z))


def laplace_from_uniform(u, double scale):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] src = np.ascontiguousarray(u, dtype=np.float64).reshape(-1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(src)
    cdef Py_ssize_t i, n = src.shape[0]
    cdef double v, tail
    for i in range(n):
        v = src[i] - 0.5
        tail = 1.0 - 2.0 * fabs(v)
        if tail < DBL_MIN:
            tail = DBL_MIN
        if v > 0:
            out[i] = -scale * log(tail)
        elif v < 0:
            out[i] = scale * log(tail)
        else:
            out[i] = 0.0
    return out.reshape(np.shape(u))


cdef inline bint _same(const cnp.int64_t[:] a, Py_ssize_t i, const cnp.int64_t[:] b, Py_ssize_t j, Py_ssize_t n) nogil:
    cdef Py_ssize_t k
    for k in range(n):
        if a[i + k] != b[j + k]:
            return False
    return True


def corpus_ngram_stats(hyp_flat, hyp_offsets, ref_flat, ref_offsets, int max_n):
    cdef const cnp.int64_t[:] hf = np.ascontiguousarray(hyp_flat, dtype=np.int64)
    cdef const cnp.int64_t[:] ho = np.ascontiguousarray(hyp_offsets, dtype=np.int64)
    cdef const cnp.int64_t[:] rf = np.ascontiguousarray(ref_flat, dtype=np.int64)
    cdef const cnp.int64_t[:] ro = np.ascontiguousarray(ref_offsets, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] matches = np.zeros(max_n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] totals = np.zeros(max_n, dtype=np.int64)
    cdef Py_ssize_t k, n, i, j, h0, h1, r0, r1, hl, rl
    cdef long ch, cr
    cdef bint seen
    with nogil:
        for k in range(ho.shape[0] - 1):
            h0 = ho[k]
            h1 = ho[k + 1]
            r0 = ro[k]
            r1 = ro[k + 1]
            hl = h1 - h0
            rl = r1 - r0
            for n in range(1, max_n + 1):
                if hl < n:
                    continue
                totals[n - 1] += hl - n + 1
                for i in range(h0, h1 - n + 1):
                    # count each distinct n-gram once, at its first occurrence
                    seen = False
                    for j in range(h0, i):
                        if _same(hf, i, hf, j, n):
                            seen = True
                            break
                    if seen:
                        continue
                    ch = 0
                    for j in range(i, h1 - n + 1):
                        if _same(hf, i, hf, j, n):
                            ch += 1
                    cr = 0
                    for j in range(r0, r1 - n + 1):
                        if _same(hf, i, rf, j, n):
                            cr += 1
                    matches[n - 1] += ch if ch < cr else cr
    return matches, totals
