"""Projected Attention Layer adapters: extra pattern-constrained heads added
alongside each encoder layer via a residual connection.

Each layer gains an unshared down-projection into the adapter space, a
multi-head attention whose heads may carry assigned pattern constraints, and
an up-projection back to the model width. The up-projection starts at zero,
so a freshly attached adapter is an exact no-op.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .importance import ImportanceReport, estimate
from .model import Model, param_names
from .patterns import PatternSpec


@dataclass(frozen=True)
class PalConfig:
    d_pal: int
    n_pal_heads: int
    head_patterns: tuple  # PatternSpec or None per adapter head
    freeze_base: bool = False

    def __post_init__(self):
        if self.d_pal < 1 or self.n_pal_heads < 1:
            raise ValueError("d_pal and n_pal_heads must be >= 1")
        if self.d_pal % self.n_pal_heads != 0:
            raise ValueError("d_pal must be divisible by n_pal_heads")
        if len(self.head_patterns) != self.n_pal_heads:
            raise ValueError("head_patterns must have one entry per adapter head")

    def to_dict(self) -> dict:
        return {
            "d_pal": self.d_pal,
            "n_pal_heads": self.n_pal_heads,
            "head_patterns": [p.to_dict() if p is not None else None
                              for p in self.head_patterns],
            "freeze_base": self.freeze_base,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PalConfig":
        patterns = tuple(PatternSpec.from_dict(p) if p is not None else None
                         for p in d.get("head_patterns", []))
        return cls(d["d_pal"], d["n_pal_heads"], patterns,
                   bool(d.get("freeze_base", False)))


def default_pal_config(d_model: int, patterns: Optional[Sequence] = None,
                       freeze_base: bool = False) -> PalConfig:
    """Adapter width d_model/2 with 4 heads, the desk-scale default ratio."""
    n_heads = 4
    pats = tuple(patterns) if patterns is not None else (None,) * n_heads
    return PalConfig(max(d_model // 2, n_heads), n_heads, pats, freeze_base)


def attach_pals(model: Model, config: PalConfig, seed: int) -> Model:
    """Return a new model with adapters on every encoder layer.

    Projections are unshared per layer and bias-free; the up-projection is
    zero-initialized so the augmented forward equals the base forward until
    training opens it up. Attaching twice is rejected.
    """
    if model.pal is not None:
        raise ValueError("model already has PAL adapters")
    d = model.config.d_model
    if config.d_pal > d:
        raise ValueError("d_pal incompatible with d_model (must be <= d_model)")
    rng = np.random.default_rng(seed)
    params = {k: v.copy() for k, v in model.params.items()}
    for i in range(model.config.n_layers):
        p = f"pal{i}."
        params[p + "down"] = rng.normal(0.0, 0.02, size=(d, config.d_pal))
        params[p + "wq"] = rng.normal(0.0, 0.02, size=(config.d_pal, config.d_pal))
        params[p + "wk"] = rng.normal(0.0, 0.02, size=(config.d_pal, config.d_pal))
        params[p + "wv"] = rng.normal(0.0, 0.02, size=(config.d_pal, config.d_pal))
        params[p + "wo"] = rng.normal(0.0, 0.02, size=(config.d_pal, config.d_pal))
        params[p + "up"] = np.zeros((config.d_pal, d))
    augmented = Model(model.config, params, pal=config, meta=dict(model.meta))
    assert set(params) == set(param_names(model.config, config))
    return augmented


def pal_param_count(d_model: int, config: PalConfig) -> int:
    """Added parameters per layer (bias-free projections)."""
    return (d_model * config.d_pal + 3 * config.d_pal * config.d_pal
            + config.d_pal * config.d_pal + config.d_pal * d_model)


def pal_head_importance(model: Model, dataset, method: str) -> ImportanceReport:
    """Importance over the union of encoder and adapter heads."""
    if model.pal is None:
        raise ValueError("model has no PAL adapters")
    return estimate(model, dataset, method)
