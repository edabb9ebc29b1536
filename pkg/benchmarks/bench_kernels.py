"""Time the compiled kernels against the pure-Python fallback (and scipy, if installed).

    python3 benchmarks/bench_kernels.py [--nodes 20000] [--degree 8] [--dim 64] [--repeat 5]
"""

import argparse
import time

import numpy as np

from vnhgcn.numerics import _pykernels as py

try:
    from vnhgcn.numerics import _ckernels as cy
except ImportError:
    cy = None

try:
    import scipy.sparse as sp
except ImportError:
    sp = None


def random_csr(rng, n, degree):
    indptr = np.arange(0, n * degree + 1, degree, dtype=np.int64)
    indices = rng.integers(0, n, size=n * degree).astype(np.int64)
    data = np.full(n * degree, 1.0 / degree)
    return indptr, indices, data


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--nodes", type=int, default=20000)
    ap.add_argument("--degree", type=int, default=8)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n = args.nodes
    indptr, indices, data = random_csr(rng, n, args.degree)
    x = rng.standard_normal((n, args.dim))

    cases = {
        "spmm": {
            "python": lambda: py.csr_spmm(indptr, indices, data, x),
            "cython": cy and (lambda: cy.csr_spmm(indptr, indices, data, x)),
            "scipy": sp and (lambda: sp.csr_matrix((data, indices, indptr), shape=(n, n)) @ x),
        },
        "spmm_t": {
            "python": lambda: py.csr_spmm_t(indptr, indices, data, x, n),
            "cython": cy and (lambda: cy.csr_spmm_t(indptr, indices, data, x, n)),
            "scipy": sp and (lambda: sp.csr_matrix((data, indices, indptr), shape=(n, n)).T @ x),
        },
        "bfs": {
            "python": lambda: py.bfs_distances(indptr, indices, 0),
            "cython": cy and (lambda: cy.bfs_distances(indptr, indices, 0)),
        },
    }

    print(f"nodes={n} degree={args.degree} dim={args.dim} best of {args.repeat}")
    print(f"{'kernel':<8} {'backend':<8} {'seconds':>10} {'vs python':>10}  agrees")
    for name, impls in cases.items():
        base_t, base_out = best_of(impls["python"], args.repeat)
        for backend, fn in impls.items():
            if not fn:
                print(f"{name:<8} {backend:<8} {'n/a':>10}")
                continue
            t, out = (base_t, base_out) if backend == "python" else best_of(fn, args.repeat)
            agrees = np.allclose(np.asarray(out), base_out, atol=1e-10)
            print(f"{name:<8} {backend:<8} {t:>10.5f} {base_t / t:>9.1f}x  {agrees}")


if __name__ == "__main__":
    main()
