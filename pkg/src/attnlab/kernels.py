"""Hot numeric kernels with numba-jitted and pure-numpy implementations.

The jitted path is the default; set ``ATTNLAB_NUMBA=0`` (or ``false``/``off``)
to select the numpy fallbacks, e.g. on platforms without a working numba.
Both implementations of every kernel stay importable so the benchmark
(``benchmarks/bench_kernels.py``) can compare them; the unsuffixed
module-level names bind whichever path is active.
"""

from __future__ import annotations

import os

import numpy as np

NUMBA_ENABLED = os.environ.get("ATTNLAB_NUMBA", "1").lower() not in ("0", "false", "off")

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:
        NUMBA_ENABLED = False


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def softmax_rows_np(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax over the last axis."""
    m = scores.max(axis=-1, keepdims=True)
    e = np.exp(scores - m)
    return e / e.sum(axis=-1, keepdims=True)


def attention_forward_np(q, k, v, bias, scale):
    """Scaled-dot-product attention over a stack of heads.

    q, k, v: (H, n, hd); bias: (H, n, n) additive logit mask (0 or -1e9).
    Returns (out, alpha) with out (H, n, hd) and alpha (H, n, n) row-stochastic.
    """
    scores = np.matmul(q, k.transpose(0, 2, 1)) * scale + bias
    alpha = softmax_rows_np(scores)
    out = np.matmul(alpha, v)
    return out, alpha


def attention_backward_np(q, k, v, alpha, d_out, scale):
    """Backward pass matching attention_forward_np; returns (d_q, d_k, d_v).

    The additive bias is constant, so it takes no gradient; d_scores flows
    through the softmax only.
    """
    d_alpha = np.matmul(d_out, v.transpose(0, 2, 1))
    d_v = np.matmul(alpha.transpose(0, 2, 1), d_out)
    inner = (d_alpha * alpha).sum(axis=-1, keepdims=True)
    d_scores = alpha * (d_alpha - inner)
    d_q = np.matmul(d_scores, k) * scale
    d_k = np.matmul(d_scores.transpose(0, 2, 1), q) * scale
    return d_q, d_k, d_v


def adam_update_np(p, g, m, v, lr, b1, b2, eps, t):
    """In-place bias-corrected Adam step on flat float64 views.

    Operation order (and the float exponent in the bias corrections) is kept
    identical to the jitted kernel so both backends update bitwise-equally.
    """
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * g * g
    c1 = 1.0 - b1 ** float(t)
    c2 = 1.0 - b2 ** float(t)
    p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def lcs_len_np(a: np.ndarray, b: np.ndarray) -> int:
    """Longest common subsequence length via rolling-row DP."""
    if a.size == 0 or b.size == 0:
        return 0
    prev = np.zeros(b.size + 1, dtype=np.int64)
    curr = np.zeros(b.size + 1, dtype=np.int64)
    for i in range(a.size):
        match = np.where(b == a[i], prev[:-1] + 1, 0)
        np.maximum(prev[1:], match, out=curr[1:])
        np.maximum.accumulate(curr, out=curr)
        prev, curr = curr, prev
    return int(prev[-1])


def match_indicator_np(tokens: np.ndarray, special: np.ndarray) -> np.ndarray:
    """Matching-token indicator: bit(i,j) = [freq(x_i) > 1] * [x_i = x_j].

    freq counts non-special positions only; rows and columns at special
    positions never fire (their freq is treated as 0).
    """
    if tokens.size == 0:
        return np.zeros((0, 0), dtype=np.uint8)
    counts = np.bincount(tokens[~special], minlength=int(tokens.max()) + 1)
    freq = np.where(special, 0, counts[tokens])
    eq = tokens[:, None] == tokens[None, :]
    ind = eq & (freq[:, None] > 1) & ~special[None, :] & ~special[:, None]
    return ind.astype(np.uint8)


# ---------------------------------------------------------------------------
# numba implementations (same contracts, loop form)
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:

    @njit(cache=True)
    def attention_forward_nb(q, k, v, bias, scale):
        H, n, hd = q.shape
        out = np.empty((H, n, hd))
        alpha = np.empty((H, n, n))
        for h in range(H):
            s = np.dot(q[h], k[h].T)
            for i in range(n):
                m = -np.inf
                for j in range(n):
                    sij = s[i, j] * scale + bias[h, i, j]
                    s[i, j] = sij
                    if sij > m:
                        m = sij
                z = 0.0
                for j in range(n):
                    e = np.exp(s[i, j] - m)
                    alpha[h, i, j] = e
                    z += e
                inv = 1.0 / z
                for j in range(n):
                    alpha[h, i, j] *= inv
            out[h] = np.dot(alpha[h], v[h])
        return out, alpha

    @njit(cache=True)
    def attention_backward_nb(q, k, v, alpha, d_out, scale):
        H, n, hd = q.shape
        d_q = np.empty((H, n, hd))
        d_k = np.empty((H, n, hd))
        d_v = np.empty((H, n, hd))
        d_scores = np.empty((n, n))
        for h in range(H):
            d_alpha = np.dot(d_out[h], v[h].T)
            d_v[h] = np.dot(alpha[h].T, d_out[h])
            for i in range(n):
                inner = 0.0
                for j in range(n):
                    inner += d_alpha[i, j] * alpha[h, i, j]
                for j in range(n):
                    d_scores[i, j] = alpha[h, i, j] * (d_alpha[i, j] - inner)
            d_q[h] = np.dot(d_scores, k[h]) * scale
            d_k[h] = np.dot(d_scores.T, q[h]) * scale
        return d_q, d_k, d_v

    @njit(cache=True)
    def adam_update_nb(p, g, m, v, lr, b1, b2, eps, t):
        c1 = 1.0 - b1 ** float(t)
        c2 = 1.0 - b2 ** float(t)
        for i in range(p.size):
            m[i] = b1 * m[i] + (1.0 - b1) * g[i]
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i]
            p[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)

    @njit(cache=True)
    def lcs_len_nb(a, b):
        na, nb = a.size, b.size
        if na == 0 or nb == 0:
            return 0
        prev = np.zeros(nb + 1, dtype=np.int64)
        curr = np.zeros(nb + 1, dtype=np.int64)
        for i in range(na):
            for j in range(nb):
                if a[i] == b[j]:
                    curr[j + 1] = prev[j] + 1
                elif prev[j + 1] >= curr[j]:
                    curr[j + 1] = prev[j + 1]
                else:
                    curr[j + 1] = curr[j]
            prev, curr = curr, prev
        return int(prev[nb])

    @njit(cache=True)
    def match_indicator_nb(tokens, special):
        n = tokens.size
        ind = np.zeros((n, n), dtype=np.uint8)
        for i in range(n):
            if special[i]:
                continue
            freq = 0
            for j in range(n):
                if not special[j] and tokens[j] == tokens[i]:
                    freq += 1
            if freq <= 1:
                continue
            for j in range(n):
                if not special[j] and tokens[j] == tokens[i]:
                    ind[i, j] = 1
        return ind

    attention_forward = attention_forward_nb
    attention_backward = attention_backward_nb
    adam_update = adam_update_nb
    lcs_len = lcs_len_nb
    match_indicator = match_indicator_nb
else:
    attention_forward = attention_forward_np
    attention_backward = attention_backward_np
    adam_update = adam_update_np
    lcs_len = lcs_len_np
    match_indicator = match_indicator_np
