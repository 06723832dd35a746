"""Seeded training runs: Adam with Noam-style warmup, gradient accumulation,
top-k checkpoint retention, the distillation comparison harness, and the
pattern ablation grid."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import inference, kernels
from .model import Model, save_checkpoint
from .patterns import HeadAssignment, PatternSpec, assignment_constraints

ABLATION_PATTERNS = {
    "m": (HeadAssignment(0, PatternSpec("match", "matching_token")),),
    "i": (HeadAssignment(1, PatternSpec("intra", "intra_sentence")),),
    "p": (HeadAssignment(2, PatternSpec("prev", "relative_position", -1)),
          HeadAssignment(3, PatternSpec("next", "relative_position", +1))),
}


def full_injection_assignments() -> tuple:
    """Heads 0..3 of every layer carry (match, intra, -1, +1)."""
    return ABLATION_PATTERNS["m"] + ABLATION_PATTERNS["i"] + ABLATION_PATTERNS["p"]


@dataclass(frozen=True)
class TrainConfig:
    steps: int
    validate_every: int
    batch_size: int = 8
    grad_accum: int = 1
    warmup: int = 0  # 0 -> 10% of steps
    peak_lr: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    top_k: int = 3
    assignments: tuple = ()
    eval_k: int = 3
    eval_blocking: bool = False

    def __post_init__(self):
        if not (self.steps >= self.validate_every >= 1):
            raise ValueError("need steps >= validate_every >= 1")
        for b in ("beta1", "beta2"):
            if not (0.0 < getattr(self, b) < 1.0):
                raise ValueError(f"{b} must be in (0, 1)")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.batch_size < 1 or self.grad_accum < 1:
            raise ValueError("batch_size and grad_accum must be >= 1")

    @property
    def warmup_steps(self) -> int:
        return self.warmup if self.warmup > 0 else max(self.steps // 10, 1)


def lr_at(step: int, warmup: int, peak: float) -> float:
    """Noam warmup/decay: peak * min(step^-0.5, step * warmup^-1.5)."""
    if step < 1:
        raise ValueError("step must be >= 1")
    return peak * min(step ** -0.5, step * warmup ** -1.5)


@dataclass
class OptimizerState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(params: dict, grads: dict, state: OptimizerState, lr: float,
              beta1: float, beta2: float, eps: float,
              names: Optional[Sequence[str]] = None) -> None:
    """In-place bias-corrected Adam update over the named parameters."""
    names = list(names) if names is not None else list(params)
    for name in names:
        if not np.all(np.isfinite(grads[name])):
            raise ValueError("non-finite gradient")
    state.step += 1
    for name in names:
        if name not in state.m:
            state.m[name] = np.zeros_like(params[name])
            state.v[name] = np.zeros_like(params[name])
        kernels.adam_update(params[name].ravel(), grads[name].ravel(),
                            state.m[name].ravel(), state.v[name].ravel(),
                            lr, beta1, beta2, eps, state.step)


@dataclass
class RunLog:
    config: dict
    points: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    best: Optional[dict] = None
    wall_clock_s: Optional[float] = None  # non-primary; excluded from to_json_obj

    def to_json_obj(self) -> dict:
        return {"config": self.config, "points": self.points,
                "checkpoints": self.checkpoints, "best": self.best}


def _doc_batches(n_docs: int, batch_size: int, steps: int, rng: np.random.Generator):
    """Seeded shuffling: yields `steps` batches of document indices, reshuffling
    each epoch."""
    order = rng.permutation(n_docs)
    pos = 0
    for _ in range(steps):
        batch = []
        while len(batch) < batch_size:
            if pos == n_docs:
                order = rng.permutation(n_docs)
                pos = 0
            batch.append(int(order[pos]))
            pos += 1
        yield batch


def train_run(model: Model, train_ds, val_ds, config: TrainConfig,
              out_dir: Optional[str] = None):
    """Train a copy of `model`; returns (RunLog, best model by val loss).

    Per-document constraints are rebuilt from the pattern assignments every
    batch. Checkpoints are retained top-k by validation loss; evaluation uses
    the single best.
    """
    for doc in train_ds.documents + val_ds.documents:
        if doc.oracle_labels is None:
            raise ValueError("missing labels")

    model = model.copy()
    if config.assignments:
        model.meta["assignments"] = [a.to_dict() for a in config.assignments]
    n_layers = model.config.n_layers
    ss = np.random.SeedSequence(config.seed)
    shuffle_rng, dropout_rng = (np.random.default_rng(c) for c in ss.spawn(2))
    state = OptimizerState()
    trainable = None
    if model.pal is not None and model.pal.freeze_base:
        trainable = [n for n in model.params if n.startswith("pal")]
    use_dropout = model.config.dropout > 0.0

    started = time.monotonic()
    log = RunLog(config={"steps": config.steps, "validate_every": config.validate_every,
                         "batch_size": config.batch_size, "grad_accum": config.grad_accum,
                         "warmup": config.warmup_steps, "peak_lr": config.peak_lr,
                         "beta1": config.beta1, "beta2": config.beta2, "eps": config.eps,
                         "seed": config.seed, "top_k": config.top_k,
                         "assignments": [a.to_dict() for a in config.assignments]})
    kept: list[tuple] = []  # (val_loss, step, path)
    best_model = None
    best_loss = float("inf")

    batches = _doc_batches(len(train_ds.documents), config.batch_size,
                           config.steps, shuffle_rng)
    for step, batch in enumerate(batches, start=1):
        grads_sum = {name: np.zeros_like(arr) for name, arr in model.params.items()}
        # chunked accumulation; identical math to one pass over the batch
        chunk = max(len(batch) // config.grad_accum, 1)
        for start in range(0, len(batch), chunk):
            for di in batch[start:start + chunk]:
                doc = train_ds.documents[di]
                cons = assignment_constraints(config.assignments, n_layers, doc)
                _, grads, _, _ = model.gradients(
                    doc, doc.oracle_labels, constraints=cons,
                    train=use_dropout, rng=dropout_rng if use_dropout else None)
                for name in grads_sum:
                    grads_sum[name] += grads[name]
        for name in grads_sum:
            grads_sum[name] /= len(batch)
        adam_step(model.params, grads_sum, state,
                  lr_at(step, config.warmup_steps, config.peak_lr),
                  config.beta1, config.beta2, config.eps, names=trainable)

        if step % config.validate_every == 0 or step == config.steps:
            val_loss = validation_loss(model, val_ds, config.assignments)
            means, _ = inference.evaluate(model, val_ds, k=config.eval_k,
                                          blocking=config.eval_blocking)
            log.points.append({"step": step, "val_loss": val_loss,
                               "rouge1_f": means["rouge1"].f1})
            if val_loss < best_loss:
                best_loss = val_loss
                best_model = model.copy()
            path = None
            if out_dir is not None:
                path = os.path.join(out_dir, f"ckpt-step{step:06d}.bin")
                save_checkpoint(model, path)
            kept.append((val_loss, step, path))
            kept.sort(key=lambda e: (e[0], e[1]))
            while len(kept) > config.top_k:
                _, _, evicted = kept.pop()
                if evicted is not None:
                    os.remove(evicted)

    log.checkpoints = [{"step": s, "val_loss": vl,
                        "path": os.path.basename(p) if p else None}
                       for vl, s, p in kept]
    log.best = dict(log.checkpoints[0]) if kept else None
    log.wall_clock_s = time.monotonic() - started
    return log, best_model


def validation_loss(model: Model, val_ds, assignments=()) -> float:
    from .model import loss as loss_fn
    total = 0.0
    for doc in val_ds.documents:
        cons = assignment_constraints(assignments, model.config.n_layers, doc)
        trace = model.forward(doc, constraints=cons)
        total += loss_fn(trace, doc.oracle_labels)
    return total / len(val_ds.documents)


def _rouge_triple(means) -> dict:
    return {"r1": means["rouge1"].f1, "r2": means["rouge2"].f1,
            "rl": means["rougel"].f1}


SUBSETS = ("none", "m", "i", "p", "m+i", "m+p", "i+p", "all")


def subset_assignments(subset: str) -> tuple:
    toggles = () if subset == "none" else \
        ("m", "i", "p") if subset == "all" else tuple(subset.split("+"))
    out: tuple = ()
    for t in toggles:
        out += ABLATION_PATTERNS[t]
    return out


def ablation_suite(model_factory, train_ds, val_ds, config: TrainConfig,
                   out_dir: Optional[str] = None) -> dict:
    """Run the 8 pattern subsets with a shared seed; report ROUGE deltas vs
    the empty subset.

    model_factory(seed) must build a fresh identically-initialized model;
    positional patterns always travel as the -1/+1 pair on heads 2 and 3.
    """
    results = {}
    base_triple = None
    for subset in SUBSETS:
        assignments = subset_assignments(subset)
        needed = 1 + max((a.head for a in assignments), default=-1)
        model = model_factory(config.seed)
        if needed > model.config.n_heads:
            raise ValueError("fewer heads than assigned patterns")
        run_cfg = replace(config, assignments=assignments)
        sub_dir = os.path.join(out_dir, subset) if out_dir else None
        if sub_dir:
            os.makedirs(sub_dir, exist_ok=True)
        _, best = train_run(model, train_ds, val_ds, run_cfg, out_dir=sub_dir)
        means, _ = inference.evaluate(best, val_ds, k=config.eval_k,
                                      blocking=config.eval_blocking)
        triple = _rouge_triple(means)
        if subset == "none":
            base_triple = triple
        results[subset] = triple
    report = {"base": base_triple, "cells": {}}
    for subset in SUBSETS:
        report["cells"][subset] = {k: results[subset][k] - base_triple[k]
                                   for k in ("r1", "r2", "rl")}
    return report


def distill_compare(model_factory, train_ds, val_ds, config: TrainConfig,
                    pal_config=None, out_dir: Optional[str] = None) -> dict:
    """Train baseline / pattern-injected / PAL variants with one seed and
    evaluate each with and without trigram blocking."""
    from .pal import attach_pals, default_pal_config

    variants = {}

    def run(name, model, run_cfg):
        sub_dir = os.path.join(out_dir, name) if out_dir else None
        if sub_dir:
            os.makedirs(sub_dir, exist_ok=True)
        _, best = train_run(model, train_ds, val_ds, run_cfg, out_dir=sub_dir)
        row = {}
        for label, blocking in (("blocking_off", False), ("blocking_on", True)):
            means, _ = inference.evaluate(best, val_ds, k=config.eval_k,
                                          blocking=blocking)
            row[label] = _rouge_triple(means)
        variants[name] = row
        return best

    baseline_best = run("baseline", model_factory(config.seed), replace(config, assignments=()))
    run("pattern", model_factory(config.seed),
        replace(config, assignments=full_injection_assignments()))
    if pal_config is None:
        pal_config = default_pal_config(
            baseline_best.config.d_model,
            patterns=[a.pattern for a in full_injection_assignments()])
    augmented = attach_pals(baseline_best, pal_config, seed=config.seed)
    run("pal", augmented, replace(config, assignments=()))
    return {"variants": variants}
