"""Miniature BERT-style extractive summarizer in numpy with exact gradients.

A sentence-classification transformer encoder: token + learned positional
embeddings, post-layer-norm residual blocks, GELU feed-forward, per-head
attention constraints (free / additive mask / fixed one-hot), a scalar gate
on every head's output, and a single-logit classifier over each sentence's
BOS hidden state. Forward and reverse passes are hand-written so that head
gates and constrained heads have exact, finite-difference-checkable
derivatives.

All math is float64. Documents are processed one at a time at their exact
length, so no PAD positions ever enter attention.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np
from scipy.special import erf

from . import kernels
from .corpus import Document

NEG_INF = -1e9  # additive logit mask; keeps softmax finite
LN_EPS = 1e-5
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int
    n_heads: int
    d_model: int
    d_ff: int
    max_len: int
    vocab_size: int
    dropout: float = 0.0

    def __post_init__(self):
        for name in ("n_layers", "n_heads", "d_model", "d_ff", "max_len", "vocab_size"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError("dropout must be in [0, 1)")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return {
            "n_layers": self.n_layers, "n_heads": self.n_heads,
            "d_model": self.d_model, "d_ff": self.d_ff,
            "max_len": self.max_len, "vocab_size": self.vocab_size,
            "dropout": self.dropout,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass(frozen=True, order=True)
class HeadId:
    layer: int
    head: int
    family: str = "encoder"


class AttentionConstraint:
    """Per-head constraint: free, additive binary mask, or fixed target map."""

    __slots__ = ("kind", "mask", "targets")

    def __init__(self, kind: str, mask: Optional[np.ndarray] = None,
                 targets: Optional[np.ndarray] = None):
        if kind not in ("free", "mask", "fixed"):
            raise ValueError(f"unknown constraint kind {kind!r}")
        self.kind = kind
        self.mask = mask
        self.targets = targets

    @staticmethod
    def free() -> "AttentionConstraint":
        return AttentionConstraint("free")

    @staticmethod
    def masked(mask: np.ndarray) -> "AttentionConstraint":
        mask = np.asarray(mask, dtype=np.uint8)
        if mask.ndim != 2 or mask.shape[0] != mask.shape[1]:
            raise ValueError("mask must be square")
        if (mask.sum(axis=1) == 0).any():
            raise ValueError("empty attention row")
        return AttentionConstraint("mask", mask=mask)

    @staticmethod
    def fixed(targets: Iterable[int]) -> "AttentionConstraint":
        t = np.asarray(list(targets), dtype=np.int64)
        if t.size and ((t < 0) | (t >= t.size)).any():
            raise ValueError("fixed targets out of range")
        return AttentionConstraint("fixed", targets=t)

    def length(self) -> Optional[int]:
        if self.kind == "mask":
            return self.mask.shape[0]
        if self.kind == "fixed":
            return self.targets.size
        return None


class HeadGateVector:
    """Scalar multiplier per head, default 1; values restricted to [0, 1]."""

    def __init__(self, gates: Optional[Mapping[HeadId, float]] = None):
        self._gates: dict[HeadId, float] = {}
        for hid, g in (gates or {}).items():
            if not (0.0 <= g <= 1.0):
                raise ValueError(f"gate for {hid} outside [0, 1]")
            self._gates[hid] = float(g)

    def get(self, hid: HeadId) -> float:
        return self._gates.get(hid, 1.0)

    def with_gate(self, hid: HeadId, value: float) -> "HeadGateVector":
        merged = dict(self._gates)
        merged[hid] = value
        return HeadGateVector(merged)

    @staticmethod
    def ones() -> "HeadGateVector":
        return HeadGateVector()


@dataclass
class ForwardTrace:
    """Attention matrices, sentence logits, and cached activations."""

    attention: dict[HeadId, np.ndarray]
    head_outputs: dict[HeadId, np.ndarray]  # post-gate, pre-projection
    logits: np.ndarray
    hidden: np.ndarray  # final hidden states (n, d_model)
    n: int
    _cache: dict = field(default_factory=dict, repr=False)


def constrained_attention(q: np.ndarray, k: np.ndarray, v: np.ndarray,
                          constraint: AttentionConstraint):
    """Single-head constrained attention; returns (output rows, alpha).

    free: softmax(q k^T / sqrt(hd)) v
    mask: softmax(q k^T / sqrt(hd) + A) v with A = 0 allowed / -1e9 disallowed
    fixed: alpha is the row-one-hot matrix of the target map (no softmax).
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    n = q.shape[0]
    if k.shape != q.shape or v.shape[0] != n:
        raise ValueError("q, k, v row counts must agree")
    clen = constraint.length()
    if clen is not None and clen != n:
        raise ValueError("constraint dimension must equal row count")
    if constraint.kind == "fixed":
        alpha = np.zeros((n, n))
        alpha[np.arange(n), constraint.targets] = 1.0
        return v[constraint.targets], alpha
    scale = 1.0 / math.sqrt(q.shape[1])
    bias = np.zeros((1, n, n))
    if constraint.kind == "mask":
        bias[0] = np.where(constraint.mask == 1, 0.0, NEG_INF)
    out, alpha = kernels.attention_forward(q[None], k[None], v[None], bias, scale)
    return out[0], alpha[0]


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

def param_names(config: ModelConfig, pal=None) -> list[str]:
    """Canonical parameter order; checkpoints serialize arrays in this order."""
    names = ["tok_emb", "pos_emb"]
    for i in range(config.n_layers):
        p = f"enc{i}."
        names += [p + "wq", p + "bq", p + "wk", p + "bk", p + "wv", p + "bv",
                  p + "wo", p + "bo", p + "ln1_g", p + "ln1_b",
                  p + "w1", p + "b1", p + "w2", p + "b2",
                  p + "ln2_g", p + "ln2_b"]
    names += ["cls_w", "cls_b"]
    if pal is not None:
        for i in range(config.n_layers):
            p = f"pal{i}."
            names += [p + "down", p + "wq", p + "wk", p + "wv", p + "wo", p + "up"]
    return names


class Model:
    """Parameter container plus forward/gradient passes."""

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray],
                 pal=None, meta: Optional[dict] = None):
        self.config = config
        self.params = params
        self.pal = pal  # PalConfig from attnlab.pal, or None
        self.meta = dict(meta or {})

    # -- structure ---------------------------------------------------------

    def head_ids(self) -> list[HeadId]:
        ids = [HeadId(l, h) for l in range(self.config.n_layers)
               for h in range(self.config.n_heads)]
        if self.pal is not None:
            ids += [HeadId(l, h, "pal") for l in range(self.config.n_layers)
                    for h in range(self.pal.n_pal_heads)]
        return ids

    def copy(self) -> "Model":
        return Model(self.config, {k: v.copy() for k, v in self.params.items()},
                     pal=self.pal, meta=dict(self.meta))

    def _check_constraints(self, constraints):
        known = set(self.head_ids())
        for hid in constraints:
            if hid not in known:
                raise ValueError(f"unknown head {hid}")

    def _pal_constraints(self, doc: Document) -> dict[HeadId, AttentionConstraint]:
        if self.pal is None:
            return {}
        from .patterns import build_constraint  # late import; patterns depends on model
        out = {}
        for h, spec in enumerate(self.pal.head_patterns):
            if spec is None:
                continue
            con = build_constraint(spec, doc)
            for l in range(self.config.n_layers):
                out[HeadId(l, h, "pal")] = con
        return out

    # -- forward -----------------------------------------------------------

    def forward(self, doc: Document, constraints=None, gates: Optional[HeadGateVector] = None,
                train: bool = False, rng: Optional[np.random.Generator] = None) -> ForwardTrace:
        """Run the encoder on one document; dropout only when train=True."""
        cfg = self.config
        P = self.params
        constraints = dict(constraints or {})
        self._check_constraints(constraints)
        gates = gates or HeadGateVector.ones()
        if doc.n > cfg.max_len:
            raise ValueError("document longer than max_len")
        # PAL heads carry their assigned pattern unless explicitly overridden
        for hid, con in self._pal_constraints(doc).items():
            constraints.setdefault(hid, con)

        n = doc.n
        ids = doc.flat
        drop_p = cfg.dropout if train else 0.0
        if drop_p > 0.0 and rng is None:
            raise ValueError("training forward with dropout requires an rng")

        def dropout(x):
            if drop_p == 0.0:
                return x, None
            mask = (rng.random(x.shape) >= drop_p) / (1.0 - drop_p)
            return x * mask, mask

        x0 = P["tok_emb"][ids] + P["pos_emb"][:n]
        x, m_emb = dropout(x0)

        attention: dict[HeadId, np.ndarray] = {}
        head_outputs: dict[HeadId, np.ndarray] = {}
        layer_caches = []
        for l in range(cfg.n_layers):
            h_in = x
            cache = {"h_in": h_in}
            x, enc_cache = self._attention_block(
                l, "encoder", h_in, cfg.n_heads, cfg.head_dim,
                P[f"enc{l}.wq"], P[f"enc{l}.bq"], P[f"enc{l}.wk"], P[f"enc{l}.bk"],
                P[f"enc{l}.wv"], P[f"enc{l}.bv"],
                constraints, gates, n, attention, head_outputs)
            cache["attn"] = enc_cache
            attn_out = x @ P[f"enc{l}.wo"] + P[f"enc{l}.bo"]
            attn_out, m_attn = dropout(attn_out)
            cache["m_attn"] = m_attn
            x1, ln1 = _layernorm(h_in + attn_out, P[f"enc{l}.ln1_g"], P[f"enc{l}.ln1_b"])
            cache["ln1"] = ln1
            cache["x1"] = x1
            z1 = x1 @ P[f"enc{l}.w1"] + P[f"enc{l}.b1"]
            a1 = _gelu(z1)
            cache["z1"] = z1
            cache["a1"] = a1
            ffn_out = a1 @ P[f"enc{l}.w2"] + P[f"enc{l}.b2"]
            ffn_out, m_ffn = dropout(ffn_out)
            cache["m_ffn"] = m_ffn
            x2, ln2 = _layernorm(x1 + ffn_out, P[f"enc{l}.ln2_g"], P[f"enc{l}.ln2_b"])
            cache["ln2"] = ln2

            if self.pal is not None:
                p_in = h_in @ P[f"pal{l}.down"]
                p_mid, pal_cache = self._attention_block(
                    l, "pal", p_in, self.pal.n_pal_heads,
                    self.pal.d_pal // self.pal.n_pal_heads,
                    P[f"pal{l}.wq"], None, P[f"pal{l}.wk"], None,
                    P[f"pal{l}.wv"], None,
                    constraints, gates, n, attention, head_outputs)
                p_out = p_mid @ P[f"pal{l}.wo"]
                pal_out = p_out @ P[f"pal{l}.up"]
                cache["pal"] = {"p_in": p_in, "attn": pal_cache, "p_out": p_out}
                x = x2 + pal_out
            else:
                x = x2
            layer_caches.append(cache)

        bos = np.array([s[0] for s in doc.spans], dtype=np.int64)
        logits = x[bos] @ P["cls_w"] + P["cls_b"][0]
        return ForwardTrace(
            attention=attention, head_outputs=head_outputs, logits=logits,
            hidden=x, n=n,
            _cache={"ids": ids, "x0": x0, "m_emb": m_emb, "bos": bos,
                    "layers": layer_caches, "doc": doc,
                    "constraints": constraints, "gates": gates},
        )

    def _attention_block(self, layer, family, x_in, n_heads, head_dim,
                         wq, bq, wk, bk, wv, bv,
                         constraints, gates, n, attention, head_outputs):
        """Multi-head constrained attention up to (but excluding) the output
        projection; gates multiply each head's rows before concatenation."""
        q_flat = x_in @ wq + (bq if bq is not None else 0.0)
        k_flat = x_in @ wk + (bk if bk is not None else 0.0)
        v_flat = x_in @ wv + (bv if bv is not None else 0.0)
        # (n, H*hd) -> (H, n, hd)
        q = np.ascontiguousarray(q_flat.reshape(n, n_heads, head_dim).transpose(1, 0, 2))
        k = np.ascontiguousarray(k_flat.reshape(n, n_heads, head_dim).transpose(1, 0, 2))
        v = np.ascontiguousarray(v_flat.reshape(n, n_heads, head_dim).transpose(1, 0, 2))

        soft, fixed = [], []
        cons = []
        for h in range(n_heads):
            con = constraints.get(HeadId(layer, h, family), _FREE)
            clen = con.length()
            if clen is not None and clen != n:
                raise ValueError("constraint dimension must equal row count")
            cons.append(con)
            (fixed if con.kind == "fixed" else soft).append(h)

        alpha = np.empty((n_heads, n, n))
        head_out = np.empty((n_heads, n, head_dim))
        if soft:
            bias = np.zeros((len(soft), n, n))
            for bi, h in enumerate(soft):
                if cons[h].kind == "mask":
                    bias[bi] = np.where(cons[h].mask == 1, 0.0, NEG_INF)
            scale = 1.0 / math.sqrt(head_dim)
            out_s, alpha_s = kernels.attention_forward(q[soft], k[soft], v[soft], bias, scale)
            for bi, h in enumerate(soft):
                alpha[h] = alpha_s[bi]
                head_out[h] = out_s[bi]
        for h in fixed:
            t = cons[h].targets
            alpha[h] = 0.0
            alpha[h, np.arange(n), t] = 1.0
            head_out[h] = v[h][t]

        g = np.array([gates.get(HeadId(layer, h, family)) for h in range(n_heads)])
        gated = head_out * g[:, None, None]
        for h in range(n_heads):
            hid = HeadId(layer, h, family)
            attention[hid] = alpha[h]
            head_outputs[hid] = gated[h]
        concat = np.ascontiguousarray(gated.transpose(1, 0, 2)).reshape(n, n_heads * head_dim)
        cache = {"x_in": x_in, "q": q, "k": k, "v": v, "alpha": alpha,
                 "head_out": head_out, "g": g, "soft": soft, "fixed": fixed,
                 "cons": cons, "n_heads": n_heads, "head_dim": head_dim,
                 "has_bias": bq is not None}
        return concat, cache

    # -- backward ----------------------------------------------------------

    def gradients(self, doc: Document, labels, constraints=None,
                  gates: Optional[HeadGateVector] = None, train: bool = False,
                  rng: Optional[np.random.Generator] = None):
        """Exact reverse-mode gradients of the mean-BCE loss.

        Returns (loss_value, param_grads, gate_grads, trace). Fixed-attention
        heads contribute no Q/K gradients (their alpha is constant).
        """
        trace = self.forward(doc, constraints=constraints, gates=gates,
                             train=train, rng=rng)
        loss_value = loss(trace, labels)
        cfg = self.config
        P = self.params
        cache = trace._cache
        n = trace.n
        y = np.asarray(labels, dtype=np.float64)
        S = y.size

        grads = {name: np.zeros_like(P[name]) for name in P}
        gate_grads: dict[HeadId, float] = {}

        sig = _sigmoid(trace.logits)
        d_logits = (sig - y) / S
        d_x = np.zeros((n, cfg.d_model))
        bos = cache["bos"]
        np.add.at(d_x, bos, d_logits[:, None] * P["cls_w"][None, :])
        grads["cls_w"] += trace.hidden[bos].T @ d_logits
        grads["cls_b"][0] += d_logits.sum()

        for l in reversed(range(cfg.n_layers)):
            lc = cache["layers"][l]
            if self.pal is not None:
                pc = lc["pal"]
                d_pal_out = d_x
                grads[f"pal{l}.up"] += pc["p_out"].T @ d_pal_out
                d_p_out = d_pal_out @ P[f"pal{l}.up"].T
                pal_concat = np.ascontiguousarray(
                    (pc["attn"]["head_out"] * pc["attn"]["g"][:, None, None])
                    .transpose(1, 0, 2)).reshape(n, self.pal.d_pal)
                grads[f"pal{l}.wo"] += pal_concat.T @ d_p_out
                d_concat_p = d_p_out @ P[f"pal{l}.wo"].T
                d_p_in = self._attention_block_backward(
                    l, "pal", pc["attn"], d_concat_p, grads, gate_grads,
                    P[f"pal{l}.wq"], None, P[f"pal{l}.wk"], None,
                    P[f"pal{l}.wv"], None, f"pal{l}.")
                grads[f"pal{l}.down"] += lc["h_in"].T @ d_p_in
                d_h_in_pal = d_p_in @ P[f"pal{l}.down"].T
            else:
                d_h_in_pal = None

            d_res2, dg2, db2 = _layernorm_backward(d_x, lc["ln2"], P[f"enc{l}.ln2_g"])
            grads[f"enc{l}.ln2_g"] += dg2
            grads[f"enc{l}.ln2_b"] += db2
            d_x1 = d_res2.copy()
            d_ffn = d_res2 if lc["m_ffn"] is None else d_res2 * lc["m_ffn"]
            grads[f"enc{l}.b2"] += d_ffn.sum(axis=0)
            grads[f"enc{l}.w2"] += lc["a1"].T @ d_ffn
            d_a1 = d_ffn @ P[f"enc{l}.w2"].T
            d_z1 = d_a1 * _gelu_grad(lc["z1"])
            grads[f"enc{l}.b1"] += d_z1.sum(axis=0)
            grads[f"enc{l}.w1"] += lc["x1"].T @ d_z1
            d_x1 += d_z1 @ P[f"enc{l}.w1"].T

            d_res1, dg1, db1 = _layernorm_backward(d_x1, lc["ln1"], P[f"enc{l}.ln1_g"])
            grads[f"enc{l}.ln1_g"] += dg1
            grads[f"enc{l}.ln1_b"] += db1
            d_h_in = d_res1.copy()
            d_attn = d_res1 if lc["m_attn"] is None else d_res1 * lc["m_attn"]
            ac = lc["attn"]
            concat = np.ascontiguousarray(
                (ac["head_out"] * ac["g"][:, None, None]).transpose(1, 0, 2)
            ).reshape(n, cfg.d_model)
            grads[f"enc{l}.bo"] += d_attn.sum(axis=0)
            grads[f"enc{l}.wo"] += concat.T @ d_attn
            d_concat = d_attn @ P[f"enc{l}.wo"].T
            d_h_in += self._attention_block_backward(
                l, "encoder", ac, d_concat, grads, gate_grads,
                P[f"enc{l}.wq"], P[f"enc{l}.bq"], P[f"enc{l}.wk"], P[f"enc{l}.bk"],
                P[f"enc{l}.wv"], P[f"enc{l}.bv"], f"enc{l}.")
            if d_h_in_pal is not None:
                d_h_in += d_h_in_pal
            d_x = d_h_in

        d_x0 = d_x if cache["m_emb"] is None else d_x * cache["m_emb"]
        np.add.at(grads["tok_emb"], cache["ids"], d_x0)
        grads["pos_emb"][:n] += d_x0
        return loss_value, grads, gate_grads, trace

    def _attention_block_backward(self, layer, family, ac, d_concat, grads,
                                  gate_grads, wq, bq, wk, bk, wv, bv, prefix):
        n_heads, head_dim = ac["n_heads"], ac["head_dim"]
        n = d_concat.shape[0]
        d_gated = np.ascontiguousarray(
            d_concat.reshape(n, n_heads, head_dim).transpose(1, 0, 2))
        for h in range(n_heads):
            hid = HeadId(layer, h, family)
            gate_grads[hid] = gate_grads.get(hid, 0.0) + float(
                np.sum(d_gated[h] * ac["head_out"][h]))
        d_head_out = d_gated * ac["g"][:, None, None]

        d_q = np.zeros((n_heads, n, head_dim))
        d_k = np.zeros((n_heads, n, head_dim))
        d_v = np.zeros((n_heads, n, head_dim))
        soft, fixed = ac["soft"], ac["fixed"]
        if soft:
            scale = 1.0 / math.sqrt(head_dim)
            dq_s, dk_s, dv_s = kernels.attention_backward(
                ac["q"][soft], ac["k"][soft], ac["v"][soft],
                ac["alpha"][soft], d_head_out[soft], scale)
            for bi, h in enumerate(soft):
                d_q[h], d_k[h], d_v[h] = dq_s[bi], dk_s[bi], dv_s[bi]
        for h in fixed:
            np.add.at(d_v[h], ac["cons"][h].targets, d_head_out[h])

        d_q_flat = np.ascontiguousarray(d_q.transpose(1, 0, 2)).reshape(n, n_heads * head_dim)
        d_k_flat = np.ascontiguousarray(d_k.transpose(1, 0, 2)).reshape(n, n_heads * head_dim)
        d_v_flat = np.ascontiguousarray(d_v.transpose(1, 0, 2)).reshape(n, n_heads * head_dim)
        x_in = ac["x_in"]
        grads[prefix + "wq"] += x_in.T @ d_q_flat
        grads[prefix + "wk"] += x_in.T @ d_k_flat
        grads[prefix + "wv"] += x_in.T @ d_v_flat
        if ac["has_bias"]:
            grads[prefix + "bq"] += d_q_flat.sum(axis=0)
            grads[prefix + "bk"] += d_k_flat.sum(axis=0)
            grads[prefix + "bv"] += d_v_flat.sum(axis=0)
        return d_q_flat @ wq.T + d_k_flat @ wk.T + d_v_flat @ wv.T


_FREE = AttentionConstraint.free()


def init_model(config: ModelConfig, seed: int) -> Model:
    """Deterministic initialization: N(0, 0.02) weights, zero biases."""
    rng = np.random.default_rng(seed)
    d, dff = config.d_model, config.d_ff
    params: dict[str, np.ndarray] = {}

    def w(shape):
        return rng.normal(0.0, 0.02, size=shape)

    params["tok_emb"] = w((config.vocab_size, d))
    params["pos_emb"] = w((config.max_len, d))
    for i in range(config.n_layers):
        p = f"enc{i}."
        params[p + "wq"] = w((d, d)); params[p + "bq"] = np.zeros(d)
        params[p + "wk"] = w((d, d)); params[p + "bk"] = np.zeros(d)
        params[p + "wv"] = w((d, d)); params[p + "bv"] = np.zeros(d)
        params[p + "wo"] = w((d, d)); params[p + "bo"] = np.zeros(d)
        params[p + "ln1_g"] = np.ones(d); params[p + "ln1_b"] = np.zeros(d)
        params[p + "w1"] = w((d, dff)); params[p + "b1"] = np.zeros(dff)
        params[p + "w2"] = w((dff, d)); params[p + "b2"] = np.zeros(d)
        params[p + "ln2_g"] = np.ones(d); params[p + "ln2_b"] = np.zeros(d)
    params["cls_w"] = w((d,))
    params["cls_b"] = np.zeros(1)
    return Model(config, params)


def loss(trace: ForwardTrace, labels) -> float:
    """Mean binary cross-entropy over sentences, from logits."""
    y = np.asarray(labels, dtype=np.float64)
    z = trace.logits
    if y.shape != z.shape:
        raise ValueError("labels length must match sentence logits")
    # stable BCE-with-logits: max(z,0) - z*y + log1p(exp(-|z|))
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return float(per.mean())


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _gelu(z):
    return 0.5 * z * (1.0 + erf(z / math.sqrt(2.0)))


def _gelu_grad(z):
    return 0.5 * (1.0 + erf(z / math.sqrt(2.0))) + z * INV_SQRT_2PI * np.exp(-0.5 * z * z)


def _layernorm(x, g, b):
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv_std
    return g * xhat + b, {"xhat": xhat, "inv_std": inv_std}


def _layernorm_backward(d_y, ln, g):
    xhat, inv_std = ln["xhat"], ln["inv_std"]
    d_g = (d_y * xhat).sum(axis=0)
    d_b = d_y.sum(axis=0)
    d_xhat = d_y * g
    m1 = d_xhat.mean(axis=1, keepdims=True)
    m2 = (d_xhat * xhat).mean(axis=1, keepdims=True)
    d_x = inv_std * (d_xhat - m1 - xhat * m2)
    return d_x, d_g, d_b


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

CKPT_MAGIC = b"ATTNLAB1"


def save_checkpoint(model: Model, path) -> None:
    """Binary container: magic, JSON header, raw float64 arrays in order."""
    names = param_names(model.config, model.pal)
    header = {
        "config": model.config.to_dict(),
        "pal": model.pal.to_dict() if model.pal is not None else None,
        "meta": model.meta,
        "arrays": [{"name": nm, "shape": list(model.params[nm].shape)} for nm in names],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(len(blob).to_bytes(8, "little"))
        f.write(blob)
        for nm in names:
            f.write(np.ascontiguousarray(model.params[nm], dtype="<f8").tobytes())


def load_checkpoint(path) -> Model:
    with open(path, "rb") as f:
        magic = f.read(len(CKPT_MAGIC))
        if magic != CKPT_MAGIC:
            raise ValueError("not an attnlab checkpoint")
        hlen = int.from_bytes(f.read(8), "little")
        header = json.loads(f.read(hlen))
        config = ModelConfig.from_dict(header["config"])
        pal = None
        if header["pal"] is not None:
            from .pal import PalConfig  # late import; pal depends on model
            pal = PalConfig.from_dict(header["pal"])
        params = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = f.read(count * 8)
            params[spec["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return Model(config, params, pal=pal, meta=header.get("meta") or {})
