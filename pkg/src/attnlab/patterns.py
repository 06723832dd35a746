"""Attention-pattern predicates, constraint builders, global relevance, and
t-test pattern selection.

Three pattern families over ordered token pairs (x_i, x_j): matching_token
(same id, restricted to tokens occurring at least twice in the document),
intra_sentence (same sentence span, markers included), and
relative_position(d) (j = i + d). A pattern's global relevance on a head is
the attention mass landing on pattern-satisfying pairs, normalized by
document length, averaged over a dataset; a pattern is kept when at least
one head's relevance is significantly above the population mean under a
one-tailed one-sample t-test.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import betainc

from . import kernels
from .corpus import Document
from .model import AttentionConstraint, HeadGateVector, HeadId, Model

KINDS = ("matching_token", "intra_sentence", "relative_position")


@dataclass(frozen=True)
class PatternSpec:
    name: str
    kind: str
    offset: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown pattern kind {self.kind!r}")
        if self.kind == "relative_position":
            if self.offset is None or self.offset == 0:
                raise ValueError("relative_position requires a nonzero offset")
        elif self.offset is not None:
            raise ValueError(f"{self.kind} takes no offset")

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.offset is not None:
            d["offset"] = self.offset
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PatternSpec":
        return cls(d["name"], d["kind"], d.get("offset"))

    @classmethod
    def load(cls, path) -> "PatternSpec":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def indicator(pattern: PatternSpec, doc: Document) -> np.ndarray:
    """|x| x |x| binary indicator of the pattern over one document."""
    n = doc.n
    if pattern.kind == "matching_token":
        return kernels.match_indicator(doc.flat, doc.special_mask())
    if pattern.kind == "intra_sentence":
        ind = np.zeros((n, n), dtype=np.uint8)
        for s, e in doc.spans:
            ind[s:e, s:e] = 1
        return ind
    d = pattern.offset
    ind = np.zeros((n, n), dtype=np.uint8)
    i = np.arange(n)
    valid = (i + d >= 0) & (i + d < n)
    ind[i[valid], i[valid] + d] = 1
    return ind


def build_constraint(pattern: PatternSpec, doc: Document) -> AttentionConstraint:
    """Mask (matching/intra) or fixed map (positional) enforcing the pattern.

    Matching-token rows are unconstrained for tokens occurring at most once
    (markers count as zero occurrences), so no row is ever empty. Positional
    rows with no valid target map to self.
    """
    n = doc.n
    if pattern.kind == "matching_token":
        special = doc.special_mask()
        counts = np.bincount(doc.flat[~special], minlength=int(doc.flat.max()) + 1)
        freq = np.where(special, 0, counts[doc.flat])
        mask = np.ones((n, n), dtype=np.uint8)
        rep = freq > 1
        eq = doc.flat[:, None] == doc.flat[None, :]
        mask[rep] = eq[rep]
        return AttentionConstraint.masked(mask)
    if pattern.kind == "intra_sentence":
        return AttentionConstraint.masked(indicator(pattern, doc))
    d = pattern.offset
    i = np.arange(n)
    targets = np.where((i + d >= 0) & (i + d < n), i + d, i)
    return AttentionConstraint.fixed(targets)


def constraint_matrix(con: AttentionConstraint, n: int) -> np.ndarray:
    """The realized binary pattern matrix of a constraint: the mask itself,
    the row-one-hot matrix of a fixed target map, or all-ones when free."""
    if con.kind == "mask":
        return con.mask
    if con.kind == "fixed":
        m = np.zeros((n, n), dtype=np.uint8)
        m[np.arange(n), con.targets] = 1
        return m
    return np.ones((n, n), dtype=np.uint8)


def gr_example(alpha: np.ndarray, ind: np.ndarray, length: int) -> float:
    """Attention mass on pattern-satisfying pairs, over document length."""
    alpha = np.asarray(alpha)
    if alpha.shape != (length, length) or ind.shape != (length, length):
        raise ValueError("alpha/indicator shape mismatch")
    return float((alpha * ind).sum() / length)


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float
    reject: bool


def t_upper_tail(t: float, df: int) -> float:
    """P(T_df > t) via the regularized incomplete beta."""
    tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + t * t))
    return float(tail if t >= 0 else 1.0 - tail)


def t_test_head(samples: Sequence[float], mu0: float, alpha: float = 0.01) -> TTestResult:
    """One-tailed one-sample t-test of mean(samples) > mu0.

    Upper-tail p-value from the Student-t survival function. Zero-variance
    samples degenerate to p = 0.5 / 0 / 1 for mean ==, >, < mu0.
    """
    x = np.asarray(samples, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError("insufficient samples")
    mean = x.mean()
    s = x.std(ddof=1)
    df = n - 1
    if s == 0.0:
        if mean == mu0:
            t, p = 0.0, 0.5
        elif mean > mu0:
            t, p = math.inf, 0.0
        else:
            t, p = -math.inf, 1.0
        return TTestResult(t, df, p, p < alpha)
    t = (mean - mu0) / (s / math.sqrt(n))
    p = t_upper_tail(t, df)
    return TTestResult(float(t), df, p, bool(p < alpha))


@dataclass
class RelevanceReport:
    pattern: PatternSpec
    head_order: tuple
    gr: dict  # HeadId -> float
    samples: dict  # HeadId -> list of per-document gr values
    tests: dict  # HeadId -> TTestResult
    population_mean: float
    significance: float

    def to_json_obj(self) -> dict:
        heads = []
        for hid in self.head_order:
            tt = self.tests[hid]
            heads.append({
                "layer": hid.layer, "head": hid.head, "family": hid.family,
                "gr": self.gr[hid], "samples": list(self.samples[hid]),
                "t": tt.t if math.isfinite(tt.t) else ("inf" if tt.t > 0 else "-inf"),
                "df": tt.df, "p": tt.p, "reject": tt.reject,
            })
        return {"pattern": self.pattern.to_dict(),
                "population_mean": self.population_mean,
                "significance": self.significance,
                "heads": heads}


def relevance_to_json(report: RelevanceReport) -> str:
    return json.dumps(report.to_json_obj(), sort_keys=True, separators=(",", ":"))


def gr_dataset(model: Model, dataset, pattern: PatternSpec,
               significance: float = 0.01) -> RelevanceReport:
    """Per-head global relevance of a pattern over a dataset, with t-tests.

    One unconstrained forward per document (gates 1, dropout off); the t-test
    null for each head is that its GR does not exceed the mean GR over all
    heads of the model.
    """
    docs = dataset.documents
    if not docs:
        raise ValueError("empty dataset")
    head_order = tuple(model.head_ids())
    samples: dict = {hid: [] for hid in head_order}
    gates = HeadGateVector.ones()
    for doc in docs:
        ind = indicator(pattern, doc)
        trace = model.forward(doc, constraints=None, gates=gates, train=False)
        for hid in head_order:
            samples[hid].append(gr_example(trace.attention[hid], ind, doc.n))
    gr = {hid: float(np.mean(samples[hid])) for hid in head_order}
    population_mean = float(np.mean([gr[hid] for hid in head_order]))
    tests = {hid: t_test_head(samples[hid], population_mean, significance)
             for hid in head_order}
    return RelevanceReport(pattern, head_order, gr, samples, tests,
                           population_mean, significance)


def select_pattern(report: RelevanceReport):
    """Keep the pattern iff at least one head rejects the null."""
    significant = [hid for hid in report.head_order if report.tests[hid].reject]
    return bool(significant), significant


# ---------------------------------------------------------------------------
# head assignments (pattern injection)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HeadAssignment:
    """Binds a pattern to one head, on one layer or (layer=None) every layer."""
    head: int
    pattern: PatternSpec
    layer: Optional[int] = None

    def to_dict(self) -> dict:
        return {"head": self.head, "layer": self.layer,
                "pattern": self.pattern.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "HeadAssignment":
        return cls(d["head"], PatternSpec.from_dict(d["pattern"]), d.get("layer"))


def assignment_constraints(assignments: Sequence[HeadAssignment], n_layers: int,
                           doc: Document) -> dict:
    """Materialize per-document constraints for a set of head assignments."""
    out: dict[HeadId, AttentionConstraint] = {}
    for asg in assignments:
        con = build_constraint(asg.pattern, doc)
        layers = range(n_layers) if asg.layer is None else (asg.layer,)
        for l in layers:
            out[HeadId(l, asg.head)] = con
    return out


def model_assignments(model: Model) -> list[HeadAssignment]:
    """Assignments a model was trained with, as carried in checkpoint meta."""
    return [HeadAssignment.from_dict(d) for d in model.meta.get("assignments", [])]


def model_doc_constraints(model: Model, doc: Document) -> dict:
    """Training-time constraints for a document, rebuilt from model meta."""
    return assignment_constraints(model_assignments(model),
                                  model.config.n_layers, doc)
