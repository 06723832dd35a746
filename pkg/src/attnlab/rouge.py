"""ROUGE-1/2/L F-scores and greedy oracle label extraction.

No stemming or stopword removal; F-measure with beta=1; ROUGE-L runs on the
flattened token sequences. Degenerate inputs (empty n-gram sets) score zero.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float


_ZERO = RougeScore(0.0, 0.0, 0.0)


def _score(overlap: float, n_cand: int, n_ref: int) -> RougeScore:
    p = overlap / n_cand if n_cand else 0.0
    r = overlap / n_ref if n_ref else 0.0
    f = 2.0 * p * r / (p + r) if p + r else 0.0
    return RougeScore(p, r, f)


def _ngrams(seq: Sequence, n: int) -> Counter:
    return Counter(tuple(seq[i:i + n]) for i in range(len(seq) - n + 1))


def rouge_n(candidate: Sequence, reference: Sequence, n: int = 1) -> RougeScore:
    """Clipped n-gram overlap precision/recall/F."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cand = _ngrams(candidate, n)
    ref = _ngrams(reference, n)
    if not cand or not ref:
        return _ZERO
    overlap = sum(min(c, ref[g]) for g, c in cand.items())
    return _score(overlap, sum(cand.values()), sum(ref.values()))


def rouge_l(candidate: Sequence, reference: Sequence) -> RougeScore:
    """Longest-common-subsequence F over whole token sequences."""
    if not candidate or not reference:
        return _ZERO
    table: dict = {}
    a = np.array([table.setdefault(t, len(table)) for t in candidate], dtype=np.int64)
    b = np.array([table.setdefault(t, len(table)) for t in reference], dtype=np.int64)
    lcs = kernels.lcs_len(a, b)
    return _score(float(lcs), len(candidate), len(reference))


def oracle_objective(candidate: Sequence, gold: Sequence) -> float:
    """Greedy selection objective: mean of ROUGE-1 and ROUGE-2 recall.

    Recall is monotone under adding sentences, so the greedy objective never
    decreases across selection steps.
    """
    return 0.5 * (rouge_n(candidate, gold, 1).recall + rouge_n(candidate, gold, 2).recall)


def greedy_oracle(doc, max_sents: int) -> list[int]:
    """Greedy per-sentence oracle labels against the document's gold summary.

    Repeatedly adds the sentence (earliest on ties) whose inclusion maximizes
    the objective of the doc-order concatenation of selected sentences; stops
    when nothing strictly improves or max_sents is reached.
    """
    if doc.gold_summary is None:
        raise ValueError("document has no gold summary")
    gold = [t for sent in doc.gold_summary for t in sent]
    sentences = doc.sentences
    selected: list[int] = []
    best = 0.0
    while len(selected) < max_sents:
        pick, pick_val = -1, best
        for s in range(len(sentences)):
            if s in selected:
                continue
            cand = [t for i in sorted(selected + [s]) for t in sentences[i]]
            val = oracle_objective(cand, gold)
            if val > pick_val:
                pick, pick_val = s, val
        if pick < 0:
            break
        selected.append(pick)
        best = pick_val
    return [1 if s in selected else 0 for s in range(len(sentences))]
