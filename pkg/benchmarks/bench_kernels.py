#!/usr/bin/env python3
"""Benchmark the numba-jitted kernels against the pure-numpy fallbacks.

Run with the jitted path available (default env):

    python benchmarks/bench_kernels.py

Prints per-kernel best-of-N wall times for both implementations and the
speedup. The numpy fallback is what you get with ATTNLAB_NUMBA=0.
"""

import time

import numpy as np

from attnlab import kernels


def best_of(fn, *args, number=5, repeat=20):
    best = float("inf")
    for _ in range(number):
        t0 = time.perf_counter()
        for _ in range(repeat):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / repeat)
    return best


def row(name, nb_fn, np_fn, args, check=None):
    nb_fn(*args)  # warm the JIT
    t_nb = best_of(nb_fn, *args)
    t_np = best_of(np_fn, *args)
    if check is not None:
        check(nb_fn(*args), np_fn(*args))
    print(f"{name:<22} numba {t_nb * 1e3:8.3f} ms   numpy {t_np * 1e3:8.3f} ms   "
          f"x{t_np / t_nb:5.1f}")


def main():
    if not kernels.NUMBA_ENABLED:
        raise SystemExit("numba backend disabled (ATTNLAB_NUMBA=0); nothing to compare")
    rng = np.random.default_rng(0)

    H, n, hd = 8, 128, 64
    q, k, v = (rng.normal(size=(H, n, hd)) for _ in range(3))
    bias = np.where(rng.random((H, n, n)) < 0.25, -1e9, 0.0)
    bias[:, :, 0] = 0.0
    scale = hd ** -0.5
    row("attention_forward", kernels.attention_forward_nb,
        kernels.attention_forward_np, (q, k, v, bias, scale),
        check=lambda a, b: np.testing.assert_allclose(a[0], b[0], atol=1e-10))

    _, alpha = kernels.attention_forward_np(q, k, v, bias, scale)
    d_out = rng.normal(size=(H, n, hd))
    row("attention_backward", kernels.attention_backward_nb,
        kernels.attention_backward_np, (q, k, v, alpha, d_out, scale),
        check=lambda a, b: np.testing.assert_allclose(a[0], b[0], atol=1e-10))

    # training-sized stack: per-document passes are dominated by call overhead
    qs, ks, vs = (rng.normal(size=(4, 60, 8)) for _ in range(3))
    bias_s = np.zeros((4, 60, 60))
    row("attention_fwd small", kernels.attention_forward_nb,
        kernels.attention_forward_np, (qs, ks, vs, bias_s, 8 ** -0.5))

    p = rng.normal(size=1_000_000)
    g = rng.normal(size=1_000_000)
    m = np.zeros_like(p)
    v2 = np.zeros_like(p)
    row("adam_update (1M)", kernels.adam_update_nb, kernels.adam_update_np,
        (p, g, m, v2, 1e-3, 0.9, 0.999, 1e-8, 3))

    a = rng.integers(0, 50, size=512).astype(np.int64)
    b = rng.integers(0, 50, size=512).astype(np.int64)
    row("lcs_len (512x512)", kernels.lcs_len_nb, kernels.lcs_len_np, (a, b),
        check=lambda x, y: np.testing.assert_equal(x, y))

    tokens = rng.integers(0, 200, size=512).astype(np.int64)
    special = rng.random(512) < 0.2
    row("match_indicator", kernels.match_indicator_nb, kernels.match_indicator_np,
        (tokens, special),
        check=lambda x, y: np.testing.assert_array_equal(x, y))


if __name__ == "__main__":
    main()
