"""Reference kernels in numpy / plain Python, used when the extension is absent."""

from collections import deque

import numpy as np


def csr_spmm(indptr, indices, data, x):
    n_rows = len(indptr) - 1
    out = np.zeros((n_rows, x.shape[1]), dtype=np.float64)
    if len(indices) == 0:
        return out
    contrib = data[:, None] * x[indices]
    nonempty = np.flatnonzero(np.diff(indptr))
    out[nonempty] = np.add.reduceat(contrib, indptr[nonempty], axis=0)
    return out


def csr_spmm_t(indptr, indices, data, g, n_cols):
    out = np.zeros((n_cols, g.shape[1]), dtype=np.float64)
    if len(indices) == 0:
        return out
    rows = np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))
    np.add.at(out, indices, data[:, None] * g[rows])
    return out


def bfs_distances(indptr, indices, start):
    n = len(indptr) - 1
    dist = np.full(n, -1, dtype=np.int64)
    dist[start] = 0
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in indices[indptr[u]:indptr[u + 1]]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist
