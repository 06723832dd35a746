import os
import subprocess
import sys

import numpy as np
import pytest

from attnlab import kernels


def test_env_flag_selects_numpy_fallback():
    code = ("import attnlab.kernels as K; "
            "assert not K.NUMBA_ENABLED; "
            "assert K.attention_forward is K.attention_forward_np; "
            "assert K.lcs_len is K.lcs_len_np")
    subprocess.run([sys.executable, "-c", code],
                   env={**os.environ, "ATTNLAB_NUMBA": "0"}, check=True)


pytestmark = pytest.mark.skipif(not kernels.NUMBA_ENABLED,
                                reason="numba backend disabled")


def rand_qkv(rng, H=3, n=7, hd=4):
    return (rng.normal(size=(H, n, hd)), rng.normal(size=(H, n, hd)),
            rng.normal(size=(H, n, hd)))


def test_attention_forward_backends_agree():
    rng = np.random.default_rng(0)
    q, k, v = rand_qkv(rng)
    bias = np.where(rng.random((3, 7, 7)) < 0.3, -1e9, 0.0)
    bias[:, :, 0] = 0.0  # keep every row non-empty
    out_nb, a_nb = kernels.attention_forward_nb(q, k, v, bias, 0.5)
    out_np, a_np = kernels.attention_forward_np(q, k, v, bias, 0.5)
    np.testing.assert_allclose(out_nb, out_np, atol=1e-12)
    np.testing.assert_allclose(a_nb, a_np, atol=1e-12)
    np.testing.assert_allclose(a_nb.sum(axis=-1), 1.0, atol=1e-12)


def test_attention_backward_backends_agree():
    rng = np.random.default_rng(1)
    q, k, v = rand_qkv(rng)
    bias = np.zeros((3, 7, 7))
    _, alpha = kernels.attention_forward_np(q, k, v, bias, 0.5)
    d_out = rng.normal(size=v.shape)
    grads_nb = kernels.attention_backward_nb(q, k, v, alpha, d_out, 0.5)
    grads_np = kernels.attention_backward_np(q, k, v, alpha, d_out, 0.5)
    for g_nb, g_np in zip(grads_nb, grads_np):
        np.testing.assert_allclose(g_nb, g_np, atol=1e-12)


def test_adam_backends_bitwise_equal():
    rng = np.random.default_rng(2)
    p1 = rng.normal(size=50); p2 = p1.copy()
    g = rng.normal(size=50)
    m1 = np.zeros(50); v1 = np.zeros(50)
    m2 = np.zeros(50); v2 = np.zeros(50)
    for t in range(1, 6):
        kernels.adam_update_nb(p1, g, m1, v1, 1e-2, 0.9, 0.999, 1e-8, t)
        kernels.adam_update_np(p2, g, m2, v2, 1e-2, 0.9, 0.999, 1e-8, t)
    assert np.array_equal(p1, p2) and np.array_equal(m1, m2) and np.array_equal(v1, v2)


def test_lcs_backends_agree():
    rng = np.random.default_rng(3)
    for _ in range(30):
        a = rng.integers(0, 5, size=rng.integers(0, 15)).astype(np.int64)
        b = rng.integers(0, 5, size=rng.integers(0, 15)).astype(np.int64)
        assert kernels.lcs_len_nb(a, b) == kernels.lcs_len_np(a, b)


def test_match_indicator_backends_agree():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(1, 20))
        tokens = rng.integers(0, 8, size=n).astype(np.int64)
        special = rng.random(n) < 0.3
        np.testing.assert_array_equal(kernels.match_indicator_nb(tokens, special),
                                      kernels.match_indicator_np(tokens, special))
