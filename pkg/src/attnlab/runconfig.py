"""Run configuration files.

One JSON file with model / data / train / patterns / pal / synth / eval /
gr / serve sections. Unknown keys are rejected with the offending dotted
path; overrides are dotted ``key=value`` pairs whose values parse as JSON
(falling back to bare strings). Every CLI run writes its resolved config
next to its outputs.
"""

from __future__ import annotations

import json
from typing import Sequence


class ConfigError(Exception):
    pass


SCHEMA = {
    "model": {"n_layers": int, "n_heads": int, "d_model": int, "d_ff": int,
              "max_len": int, "vocab_size": int, "dropout": float},
    "data": {"train": str, "val": str, "vocab": str, "truncation": int,
             "oracle_sents": int},
    "train": {"steps": int, "validate_every": int, "batch_size": int,
              "grad_accum": int, "warmup": int, "peak_lr": float,
              "beta1": float, "beta2": float, "eps": float, "seed": int,
              "top_k": int, "init_checkpoint": str, "eval_k": int,
              "eval_blocking": bool},
    "patterns": {"assignments": list},
    "pal": {"d_pal": int, "n_pal_heads": int, "head_patterns": list,
            "freeze_base": bool, "seed": int},
    "synth": {"n_docs": int, "sents_per_doc": int, "tokens_per_sent": int,
              "vocab_size": int, "repeat_signal": bool, "gold_sents": int,
              "n_keys": int, "seed": int, "val_fraction": float},
    "eval": {"k": int, "blocking": bool},
    "gr": {"significance": float},
    "serve": {"host": str, "port": int, "checkpoint": str, "split": str,
              "runs_dir": str, "injection_config": str},
}


def _check_leaf(key: str, value, leaf_type) -> None:
    if leaf_type is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif leaf_type is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif leaf_type is bool:
        ok = isinstance(value, bool)
    elif leaf_type is list:
        ok = isinstance(value, list)
    else:
        ok = isinstance(value, leaf_type)
    if not ok:
        raise ConfigError(f"{key}: expected {leaf_type.__name__}")


def validate(cfg: dict, schema: dict = SCHEMA, path: str = "") -> None:
    for key, value in cfg.items():
        full = path + key
        if key not in schema:
            raise ConfigError(f"unknown key {full!r}")
        sub = schema[key]
        if isinstance(sub, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{full}: expected a section object")
            validate(value, sub, full + ".")
        else:
            _check_leaf(full, value, sub)


def apply_override(cfg: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    dotted, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = dotted.split(".")
    for part in parts[:-1]:
        if not isinstance(node, dict):
            raise ConfigError(f"override {dotted!r} descends into a non-section value")
        node = node.setdefault(part, {})
    if not isinstance(node, dict):
        raise ConfigError(f"override {dotted!r} descends into a non-section value")
    node[parts[-1]] = value


def load_config(path, overrides: Sequence[str] = ()) -> dict:
    try:
        with open(path) as f:
            cfg = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    for item in overrides:
        apply_override(cfg, item)
    validate(cfg)
    return cfg


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def require(cfg: dict, dotted: str):
    node = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"missing required key {dotted!r}")
        node = node[part]
    return node


def get(cfg: dict, dotted: str, default=None):
    node = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node
