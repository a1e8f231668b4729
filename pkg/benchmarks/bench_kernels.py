"""Time every hot kernel under numba and under plain numpy.

    python benchmarks/bench_kernels.py [--sizes 1000,2000,4000] [--repeats 5]

Prints a CSV: kernel,n,numba_ms,numpy_ms,speedup. Both variants are
imported directly, so the PAMC_DISABLE_NUMBA flag has no effect here.
"""
import argparse
import sys
import time

import numpy as np

from pamc import _kernels as K
from pamc.graph import influence_weights
from pamc.numerics import make_rng
from pamc.trainer import random_graph


def median_ms(fn, repeats):
    fn()
    out = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        out.append((time.perf_counter() - t0) * 1e3)
    return float(np.median(out))


def cases(n, rng):
    z = rng.standard_normal((n, 10))
    zn = z / np.linalg.norm(z, axis=1, keepdims=True)
    indptr, indices, w = influence_weights(random_graph(n, 10, rng), 1).csr_arrays()
    lse = K.edge_logsumexp_numpy(zn, indptr, indices, w, 0.5)
    g = np.ones(n)
    x = rng.standard_normal((n, 20))
    return {
        "edge_logsumexp": lambda f: f(zn, indptr, indices, w, 0.5),
        "edge_logsumexp_grad": lambda f: f(zn, indptr, indices, w, 0.5, lse, g),
        "dense_contrastive": lambda f: f(zn, indptr, indices, w, 0.5),
        "knn": lambda f: f(x, 5),
    }


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="1000,2000,4000")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args(argv)
    if not K.HAVE_NUMBA:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1
    rng = make_rng(0)
    print("kernel,n,numba_ms,numpy_ms,speedup")
    for n in (int(s) for s in args.sizes.split(",")):
        for name, call in cases(n, rng).items():
            nb = median_ms(lambda: call(getattr(K, f"{name}_numba")), args.repeats)
            np_ = median_ms(lambda: call(getattr(K, f"{name}_numpy")), args.repeats)
            print(f"{name},{n},{nb:.3f},{np_:.3f},{np_ / nb:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
