"""Compare the numba and numpy window sieves on realistic offset searches.

    python3 benchmarks/bench_sieve.py [--k 1024] [--reps 200]

Both kernels are timed on the same (width, moduli, starts) inputs, and the
masks are checked to be identical before any timing is reported.
"""

import argparse
import random
import time

import numpy as np

from eakg import _kernels
from eakg.rsa import DEFAULT_E, _sieve_moduli, delta_bound


def make_inputs(k, e, count, seed=1):
    rnd = random.Random(seed)
    width = delta_bound(k, e)
    cases = []
    for _ in range(count):
        total = (1 << (k + 1)) + rnd.getrandbits(k + 1)
        moduli, forbidden = _sieve_moduli(total, width, e)
        cases.append((width, moduli, _kernels.window_starts(total, moduli, forbidden)))
    return cases


def time_kernel(fn, cases, reps):
    t0 = time.perf_counter()
    for _ in range(reps):
        for width, moduli, starts in cases:
            fn(width, moduli, starts)
    return (time.perf_counter() - t0) / (reps * len(cases))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=int, nargs="+", default=[128, 512, 1024])
    ap.add_argument("--e", type=int, default=DEFAULT_E)
    ap.add_argument("--cases", type=int, default=20)
    ap.add_argument("--reps", type=int, default=50)
    args = ap.parse_args()

    if _kernels.sieve_window_numba is None:
        print("numba unavailable or disabled; timing numpy only")

    print("k,width,moduli,numpy_us,numba_us,speedup")
    for k in args.k:
        cases = make_inputs(k, args.e, args.cases)
        width, moduli, _ = cases[0]
        t_np = time_kernel(_kernels.sieve_window_numpy, cases, args.reps)
        if _kernels.sieve_window_numba is None:
            print("{},{},{},{:.2f},,".format(k, width, len(moduli), t_np * 1e6))
            continue
        for w, m, s in cases:
            assert np.array_equal(_kernels.sieve_window_numpy(w, m, s), _kernels.sieve_window_numba(w, m, s))
        _kernels.sieve_window_numba(*cases[0])  # compile outside the timed loop
        t_nb = time_kernel(_kernels.sieve_window_numba, cases, args.reps)
        print("{},{},{},{:.2f},{:.2f},{:.1f}".format(k, width, len(moduli), t_np * 1e6, t_nb * 1e6, t_np / t_nb))


if __name__ == "__main__":
    main()
