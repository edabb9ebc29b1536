"""Backend selection for the CSR kernels.

The compiled extension is used when it was built; otherwise the numpy
fallback. Set ``VNHGCN_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from vnhgcn.numerics import _pykernels

if os.environ.get("VNHGCN_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from vnhgcn.numerics import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"


def _prep(indptr, indices, data):
    return (np.ascontiguousarray(indptr, dtype=np.int64),
            np.ascontiguousarray(indices, dtype=np.int64),
            np.ascontiguousarray(data, dtype=np.float64))


def csr_spmm(indptr, indices, data, x):
    """Return ``A @ x`` for the CSR matrix ``A``."""
    indptr, indices, data = _prep(indptr, indices, data)
    return _impl.csr_spmm(indptr, indices, data, np.ascontiguousarray(x, dtype=np.float64))


def csr_spmm_t(indptr, indices, data, g, n_cols):
    """Return ``A.T @ g`` without materializing the transpose."""
    indptr, indices, data = _prep(indptr, indices, data)
    return _impl.csr_spmm_t(indptr, indices, data,
                            np.ascontiguousarray(g, dtype=np.float64), int(n_cols))


def bfs_distances(indptr, indices, start):
    """Unweighted hop distances from ``start``; -1 marks unreachable nodes."""
    indptr = np.ascontiguousarray(indptr, dtype=np.int64)
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    return _impl.bfs_distances(indptr, indices, int(start))
