#!/usr/bin/env python3
"""Benchmark the compiled MLP kernels against the NumPy fallback.

Times the two hot operations (batched forward pass, per-sample Jacobian
assembly) across problem sizes spanning the package's presets, checks
that the backends agree to roundoff, and prints a table plus speedups.

    python3 benchmarks/bench_kernels.py [--repeats 50] [--csv out.csv]
"""

import argparse
import csv
import sys
import time

import numpy as np

from mmsflow._kernels import available_backends, get_backend

# (label, dims, n_samples): dims = (input, hidden..., output)
CASES = [
    ("1d tiny", (1, 10, 1), 256),
    ("1d preset", (1, 32, 1), 256),
    ("1d deep", (1, 20, 20, 20, 1), 256),
    ("10d preset", (10, 32, 1), 1000),
    ("10d wide", (10, 128, 1), 1000),
    ("vector out", (4, 16, 8), 256),
]


def param_count(dims):
    return sum((a + 1) * b for a, b in zip(dims[:-1], dims[1:]))


def bench(fn, repeats):
    fn()  # warm up
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=30)
    parser.add_argument("--csv", help="also write the table to a CSV file")
    args = parser.parse_args(argv)

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; nothing to compare", file=sys.stderr)
        return 1
    nb = get_backend("numpy")
    cb = get_backend("compiled")

    rng = np.random.default_rng(0)
    rows = []
    header = (
        f"{'case':<12} {'n':>5} {'p':>6} "
        f"{'fwd numpy':>11} {'fwd cython':>11} {'x':>6} "
        f"{'jac numpy':>11} {'jac cython':>11} {'x':>6}"
    )
    print(header)
    print("-" * len(header))
    for label, dims, n in CASES:
        p = param_count(dims)
        params = rng.normal(size=p)
        x = rng.uniform(-1, 1, size=(n, dims[0]))

        # parity guard before timing
        u_n, j_n = nb.forward_jacobian(x, params, dims)
        u_c, j_c = cb.forward_jacobian(x, params, dims)
        assert np.allclose(u_n, u_c, rtol=1e-12, atol=1e-14)
        assert np.allclose(j_n, j_c, rtol=1e-12, atol=1e-14)

        t_fwd_n = bench(lambda: nb.forward(x, params, dims), args.repeats)
        t_fwd_c = bench(lambda: cb.forward(x, params, dims), args.repeats)
        t_jac_n = bench(lambda: nb.forward_jacobian(x, params, dims), args.repeats)
        t_jac_c = bench(lambda: cb.forward_jacobian(x, params, dims), args.repeats)
        rows.append((label, n, p, t_fwd_n, t_fwd_c, t_jac_n, t_jac_c))
        print(
            f"{label:<12} {n:>5} {p:>6} "
            f"{t_fwd_n * 1e6:>9.1f}us {t_fwd_c * 1e6:>9.1f}us "
            f"{t_fwd_n / t_fwd_c:>6.2f} "
            f"{t_jac_n * 1e6:>9.1f}us {t_jac_c * 1e6:>9.1f}us "
            f"{t_jac_n / t_jac_c:>6.2f}"
        )
    print("(x = numpy time / cython time; > 1 means the extension is faster)")

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["case", "n", "p", "forward_numpy_s",
                             "forward_compiled_s", "jacobian_numpy_s",
                             "jacobian_compiled_s"])
            writer.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
