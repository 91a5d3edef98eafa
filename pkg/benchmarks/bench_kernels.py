#!/usr/bin/env python3
"""Time the numba-compiled kernels against the pure-numpy fallbacks.

Run `NACRL_NUMBA=0 python3 benchmarks/bench_kernels.py` to confirm the
fallback path is what the flag selects (the jit column then reads n/a).
"""

import argparse
import time

import numpy as np

from nacrl import kernels


def bench(fn, args, repeats, warmup=3):
    for _ in range(warmup):
        fn(*args)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="fewer repeats")
    parser.add_argument("--batch", type=int, default=32)
    args = parser.parse_args()
    repeats = 200 if args.quick else 2000

    rng = np.random.default_rng(0)
    n, d, h, a = args.batch, 28, 64, 9
    x = rng.standard_normal((n, d))
    w1 = rng.standard_normal((d, h)) * 0.1
    b1 = np.zeros(h)
    w2 = rng.standard_normal((h, h)) * 0.1
    b2 = np.zeros(h)
    w3 = rng.standard_normal((h, a)) * 0.1
    b3 = np.zeros(a)
    q = rng.standard_normal((n, a)) * 5
    upstream = rng.standard_normal((n, a))
    fwd_np = kernels.mlp_forward_np(x, w1, b1, w2, b2, w3, b3)
    p = kernels.softmax_rows_np(q, 0.1)

    cases = [
        ("mlp_forward", kernels.mlp_forward, kernels.mlp_forward_np,
         (x, w1, b1, w2, b2, w3, b3)),
        ("mlp_backward", kernels.mlp_backward, kernels.mlp_backward_np,
         (x, w2, w3, fwd_np[1], fwd_np[2], fwd_np[3], fwd_np[4], upstream)),
        ("logsumexp_rows", kernels.logsumexp_rows, kernels.logsumexp_rows_np, (q, 0.1)),
        ("softmax_rows", kernels.softmax_rows, kernels.softmax_rows_np, (q, 0.1)),
        ("entropy_rows", kernels.entropy_rows, kernels.entropy_rows_np, (p,)),
    ]

    print(f"numba enabled: {kernels.NUMBA_ENABLED} (batch={n}, repeats={repeats})")
    print(f"{'kernel':<16}{'numpy us':>12}{'jit us':>12}{'speedup':>10}")
    for name, jit_fn, np_fn, fn_args in cases:
        t_np = bench(np_fn, fn_args, repeats) * 1e6
        if kernels.NUMBA_ENABLED:
            t_jit = bench(jit_fn, fn_args, repeats) * 1e6
            print(f"{name:<16}{t_np:>12.2f}{t_jit:>12.2f}{t_np / t_jit:>10.2f}x")
        else:
            print(f"{name:<16}{t_np:>12.2f}{'n/a':>12}{'n/a':>10}")


if __name__ == "__main__":
    main()
