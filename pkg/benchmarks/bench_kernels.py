"""Timing of the exhaustive founder and idea scans, numba vs numpy.

    python benchmarks/bench_kernels.py [--sizes 6081 50000] [--dim 384] [--repeat 20]

6081 is the size of the labelled founder dataset the method was built on.
"""

import argparse
import time

import numpy as np

from founderfit import _kernels


def _data(n, dim, rng):
    desc = rng.normal(size=(n, dim))
    jobs = rng.normal(size=(n, dim))
    return (desc, np.einsum("ij,ij->i", desc, desc), jobs, np.einsum("ij,ij->i", jobs, jobs),
            rng.integers(0, 4, n), rng.integers(0, 2, n), rng.integers(0, 1 << 12, n).astype(np.uint16))


def _time(fn, args, repeat):
    fn(*args)  # warm-up (includes JIT compilation)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[6081, 50_000])
    ap.add_argument("--dim", type=int, default=384)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    impls = _kernels.implementations()
    q = rng.normal(size=args.dim)
    qj = rng.normal(size=args.dim)
    print(f"{'n':>8} {'scan':>8} " + " ".join(f"{name + ' ms':>12}" for name in impls))
    for n in args.sizes:
        desc, desc_sq, jobs, jobs_sq, degs, tops, masks = _data(n, args.dim, rng)
        founder_args = (q, float(q @ q), qj, float(qj @ qj), 2, 1, 0b101, desc, desc_sq, jobs, jobs_sq,
                        degs, tops, masks)
        cos_args = (q, float(q @ q), desc, desc_sq)
        ref = impls["numpy"][0](*founder_args)
        for name, (f_fn, _) in impls.items():
            assert np.allclose(f_fn(*founder_args), ref, atol=1e-9), name
        row_f = [_time(f_fn, founder_args, args.repeat) * 1e3 for f_fn, _ in impls.values()]
        row_c = [_time(c_fn, cos_args, args.repeat) * 1e3 for _, c_fn in impls.values()]
        print(f"{n:>8} {'founder':>8} " + " ".join(f"{t:>12.3f}" for t in row_f))
        print(f"{n:>8} {'idea':>8} " + " ".join(f"{t:>12.3f}" for t in row_c))


if __name__ == "__main__":
    main()
