"""Summary selection from sentence scores, trigram blocking, and dataset
ROUGE evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rouge
from .model import Model, _sigmoid
from .patterns import model_doc_constraints


@dataclass(frozen=True)
class SummaryPrediction:
    doc_id: str
    selected: tuple  # sentence indices in document order
    scores: tuple  # per-sentence scores
    blocking: bool

    def to_dict(self) -> dict:
        return {"id": self.doc_id, "selected": list(self.selected),
                "scores": list(self.scores)}


def sentence_trigrams(token_ids) -> set:
    return {tuple(token_ids[i:i + 3]) for i in range(len(token_ids) - 2)}


def select_summary(scores, doc, k: int, blocking: bool) -> SummaryPrediction:
    """Pick up to k sentences by descending score (ties by document order).

    With blocking on, a sentence sharing any token trigram with the union of
    already-selected sentences is skipped. Output indices are in document
    order.
    """
    scores = [float(s) for s in scores]
    if len(scores) != doc.n_sentences:
        raise ValueError("scores length must match sentence count")
    if k < 1:
        raise ValueError("k must be >= 1")
    order = sorted(range(len(scores)), key=lambda s: (-scores[s], s))
    chosen: list[int] = []
    seen: set = set()
    for s in order:
        if len(chosen) == k:
            break
        tris = sentence_trigrams(doc.sentences[s])
        if blocking and tris & seen:
            continue
        chosen.append(s)
        seen |= tris
    return SummaryPrediction(doc.id, tuple(sorted(chosen)), tuple(scores), blocking)


def evaluate(model: Model, dataset, k: int = 3, blocking: bool = False):
    """Mean ROUGE-1/2/L of selected vs gold summaries over a dataset.

    Constraints the model was trained with are rebuilt per document. Returns
    (means, predictions) where means maps rouge1/rouge2/rougel to RougeScore
    triples averaged component-wise over documents.
    """
    docs = dataset.documents
    if not docs:
        raise ValueError("empty dataset")
    acc = {m: np.zeros(3) for m in ("rouge1", "rouge2", "rougel")}
    predictions = []
    for doc in docs:
        trace = model.forward(doc, constraints=model_doc_constraints(model, doc))
        scores = _sigmoid(trace.logits)
        pred = select_summary(scores, doc, k, blocking)
        predictions.append(pred)
        cand = [t for s in pred.selected for t in doc.sentences[s]]
        ref = [t for sent in doc.gold_summary for t in sent]
        for name, sc in (("rouge1", rouge.rouge_n(cand, ref, 1)),
                         ("rouge2", rouge.rouge_n(cand, ref, 2)),
                         ("rougel", rouge.rouge_l(cand, ref))):
            acc[name] += (sc.precision, sc.recall, sc.f1)
    means = {name: rouge.RougeScore(*(vals / len(docs))) for name, vals in acc.items()}
    return means, predictions
