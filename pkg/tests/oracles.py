"""Independent brute-force oracles used only by tests.

These deliberately avoid the package's own code paths: plain-python n-gram
counting, quadratic LCS, triple-loop attention aggregation, and numerical
integration of the Student-t density.
"""

import math


def ngram_counts(seq, n):
    out = {}
    for i in range(len(seq) - n + 1):
        g = tuple(seq[i:i + n])
        out[g] = out.get(g, 0) + 1
    return out


def ref_rouge_n(cand, ref, n):
    c = ngram_counts(cand, n)
    r = ngram_counts(ref, n)
    overlap = sum(min(v, r.get(g, 0)) for g, v in c.items())
    nc, nr = sum(c.values()), sum(r.values())
    p = overlap / nc if nc else 0.0
    rec = overlap / nr if nr else 0.0
    f = 2 * p * rec / (p + rec) if p + rec else 0.0
    return p, rec, f


def ref_lcs(a, b):
    m, n = len(a), len(b)
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m):
        for j in range(n):
            if a[i] == b[j]:
                dp[i + 1][j + 1] = dp[i][j] + 1
            else:
                dp[i + 1][j + 1] = max(dp[i][j + 1], dp[i + 1][j])
    return dp[m][n]


def ref_oracle_objective(cand, gold):
    _, r1, _ = ref_rouge_n(cand, gold, 1)
    _, r2, _ = ref_rouge_n(cand, gold, 2)
    return 0.5 * (r1 + r2)


def ref_greedy_labels(sentences, gold, max_sents):
    """Exhaustive per-step scan with doc-order tie-break."""
    selected = []
    best = 0.0
    while len(selected) < max_sents:
        pick, pick_val = -1, best
        for s in range(len(sentences)):
            if s in selected:
                continue
            cand = [t for i in sorted(selected + [s]) for t in sentences[i]]
            val = ref_oracle_objective(cand, gold)
            if val > pick_val:
                pick, pick_val = s, val
        if pick < 0:
            break
        selected.append(pick)
        best = pick_val
    return [1 if s in selected else 0 for s in range(len(sentences))]


def ref_gr(alpha, indicator_fn, n):
    """Triple-loop aggregation of attention mass where the predicate holds."""
    total = 0.0
    for i in range(n):
        for j in range(n):
            if indicator_fn(i, j):
                total += float(alpha[i][j])
    return total / n


def student_t_density(x, df):
    c = math.gamma((df + 1) / 2.0) / (math.sqrt(df * math.pi) * math.gamma(df / 2.0))
    return c * (1.0 + x * x / df) ** (-(df + 1) / 2.0)


def ref_t_upper_tail(t, df, steps=200_000, hi=60.0):
    """P(T_df > t) by Simpson integration of the density on [t, hi]."""
    if t >= hi:
        return 0.0
    h = (hi - t) / steps
    total = student_t_density(t, df) + student_t_density(hi, df)
    for i in range(1, steps):
        x = t + i * h
        total += (4 if i % 2 else 2) * student_t_density(x, df)
    return total * h / 3.0
