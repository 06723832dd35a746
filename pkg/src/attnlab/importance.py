"""Head-importance estimation: leave-one-out, gate sensitivity, first-order
Taylor, and estimator comparison.

Leave-one-out is the reference: the total validation-loss increment when a
head's gate is forced to zero. Sensitivity and Taylor are the one-pass
gradient proxies; both are sign-free (absolute value / square).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import HeadGateVector, HeadId, Model, loss
from .patterns import model_doc_constraints

METHODS = ("loo", "sensitivity", "taylor")


@dataclass
class ImportanceReport:
    method: str
    dataset: str
    baseline_loss: float
    head_order: tuple
    raw: dict  # HeadId -> float
    normalized: dict  # HeadId -> float

    def to_json_obj(self) -> dict:
        return {
            "method": self.method,
            "dataset": self.dataset,
            "baseline_loss": self.baseline_loss,
            "heads": [{"layer": h.layer, "head": h.head, "family": h.family,
                       "raw": self.raw[h], "normalized": self.normalized[h]}
                      for h in self.head_order],
        }


def report_to_json(report: ImportanceReport) -> str:
    return json.dumps(report.to_json_obj(), sort_keys=True, separators=(",", ":"))


def _require_docs(dataset):
    if not dataset.documents:
        raise ValueError("empty dataset")
    for doc in dataset.documents:
        if doc.oracle_labels is None:
            raise ValueError("document missing oracle labels")


def _doc_loss(model: Model, doc, gates: HeadGateVector) -> float:
    trace = model.forward(doc, constraints=model_doc_constraints(model, doc),
                          gates=gates, train=False)
    return loss(trace, doc.oracle_labels)


def leave_one_out(model: Model, dataset) -> ImportanceReport:
    """I(h) = sum over documents of loss(gate_h = 0) - loss(all gates 1)."""
    _require_docs(dataset)
    heads = tuple(model.head_ids())
    ones = HeadGateVector.ones()
    base = [_doc_loss(model, doc, ones) for doc in dataset.documents]
    raw = {}
    for hid in heads:
        gates = ones.with_gate(hid, 0.0)
        ablated = [_doc_loss(model, doc, gates) for doc in dataset.documents]
        raw[hid] = float(np.sum(np.asarray(ablated) - np.asarray(base)))
    return _finish("loo", dataset, float(np.sum(base)), heads, raw)


def sensitivity(model: Model, dataset) -> ImportanceReport:
    """Sum over documents of |dL/d gate_h| at gates = 1."""
    _require_docs(dataset)
    heads = tuple(model.head_ids())
    raw = {hid: 0.0 for hid in heads}
    total = 0.0
    for doc in dataset.documents:
        lv, _, gate_grads, _ = model.gradients(
            doc, doc.oracle_labels,
            constraints=model_doc_constraints(model, doc))
        total += lv
        for hid in heads:
            raw[hid] += abs(gate_grads[hid])
    return _finish("sensitivity", dataset, total, heads, raw)


def _head_param_slices(model: Model, hid: HeadId):
    """(name, slice-getter) pairs for the parameters owned by one head:
    Q/K/V column slices with their biases, plus the output-projection rows."""
    if hid.family == "encoder":
        hd = model.config.head_dim
        sl = slice(hid.head * hd, (hid.head + 1) * hd)
        p = f"enc{hid.layer}."
        return [(p + "wq", (slice(None), sl)), (p + "bq", (sl,)),
                (p + "wk", (slice(None), sl)), (p + "bk", (sl,)),
                (p + "wv", (slice(None), sl)), (p + "bv", (sl,)),
                (p + "wo", (sl, slice(None)))]
    hd = model.pal.d_pal // model.pal.n_pal_heads
    sl = slice(hid.head * hd, (hid.head + 1) * hd)
    p = f"pal{hid.layer}."
    return [(p + "wq", (slice(None), sl)),
            (p + "wk", (slice(None), sl)),
            (p + "wv", (slice(None), sl)),
            (p + "wo", (sl, slice(None)))]


def taylor(model: Model, dataset) -> ImportanceReport:
    """First-order Taylor score: (sum over head parameters of theta * dL/dtheta)^2,
    with the gradient of the loss summed over the dataset."""
    _require_docs(dataset)
    heads = tuple(model.head_ids())
    total_grads = {name: np.zeros_like(arr) for name, arr in model.params.items()}
    total = 0.0
    for doc in dataset.documents:
        lv, grads, _, _ = model.gradients(
            doc, doc.oracle_labels,
            constraints=model_doc_constraints(model, doc))
        total += lv
        for name in total_grads:
            total_grads[name] += grads[name]
    raw = {}
    for hid in heads:
        acc = 0.0
        for name, idx in _head_param_slices(model, hid):
            acc += float(np.sum(model.params[name][idx] * total_grads[name][idx]))
        raw[hid] = acc * acc
    return _finish("taylor", dataset, total, heads, raw)


def _finish(method, dataset, baseline, heads, raw) -> ImportanceReport:
    report = ImportanceReport(method, dataset.split, baseline, heads, raw, {})
    return normalize(report)


def normalize(report: ImportanceReport) -> ImportanceReport:
    """Global min-max over all heads; all-equal raw scores map to all zeros."""
    vals = np.array([report.raw[h] for h in report.head_order])
    lo, hi = vals.min(), vals.max()
    if hi == lo:
        norm = {h: 0.0 for h in report.head_order}
    else:
        norm = {h: float((report.raw[h] - lo) / (hi - lo)) for h in report.head_order}
    report.normalized = norm
    return report


def compare(a: ImportanceReport, b: ImportanceReport) -> float:
    """Cosine similarity of raw score vectors in a fixed head order."""
    if a.head_order != b.head_order:
        raise ValueError("head sets differ")
    va = np.array([a.raw[h] for h in a.head_order])
    vb = np.array([b.raw[h] for h in b.head_order])
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise ValueError("undefined cosine")
    return float(va @ vb / (na * nb))


def estimate(model: Model, dataset, method: str) -> ImportanceReport:
    if method == "loo":
        return leave_one_out(model, dataset)
    if method == "sensitivity":
        return sensitivity(model, dataset)
    if method == "taylor":
        return taylor(model, dataset)
    raise ValueError(f"unknown importance method {method!r}")
