# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled CSR kernels. Signatures mirror ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def csr_spmm(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
             const double[::1] data, const double[:, ::1] x):
    cdef Py_ssize_t n_rows = indptr.shape[0] - 1
    cdef Py_ssize_t d = x.shape[1]
    out_arr = np.zeros((n_rows, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, p, k, j
    cdef double a
    for i in range(n_rows):
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            a = data[p]
            for k in range(d):
                out[i, k] += a * x[j, k]
    return out_arr


def csr_spmm_t(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
               const double[::1] data, const double[:, ::1] g, Py_ssize_t n_cols):
    cdef Py_ssize_t n_rows = indptr.shape[0] - 1
    cdef Py_ssize_t d = g.shape[1]
    out_arr = np.zeros((n_cols, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, p, k, j
    cdef double a
    for i in range(n_rows):
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            a = data[p]
            for k in range(d):
                out[j, k] += a * g[i, k]
    return out_arr


def bfs_distances(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                  Py_ssize_t start):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    dist_arr = np.full(n, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] dist = dist_arr
    queue_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = queue_arr
    cdef Py_ssize_t head = 0, tail = 0, u, v, p
    dist[start] = 0
    queue[tail] = start
    tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue[tail] = v
                tail += 1
    return dist_arr
