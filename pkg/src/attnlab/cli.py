"""Command-line entry point.

Subcommands: synth, train, importance, gr, select, inject-pal, ablate,
compare, eval, serve. Every run writes its resolved config next to its
outputs; all randomness flows from config seeds, so re-running a subcommand
with the same config yields byte-identical primary artifacts (wall-clock
timings live in a separate, non-primary timing.json).

Exit codes: 0 success, 2 bad config/usage (with the offending key), 1
runtime failure, each with a one-line diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import corpus, importance as importance_mod, inference, patterns, trainer
from .model import Model, ModelConfig, init_model, load_checkpoint, save_checkpoint
from .runconfig import ConfigError, canonical_json, get, load_config, require


def _write(path, text: str) -> None:
    with open(path, "w") as f:
        f.write(text)


def _out_dir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write_resolved(cfg: dict, out: str) -> None:
    _write(os.path.join(out, "config.json"), canonical_json(cfg))


def _model_config(cfg: dict) -> ModelConfig:
    sec = require(cfg, "model")
    try:
        return ModelConfig.from_dict(sec)
    except TypeError as e:
        raise ConfigError(f"model section: {e}")


def _load_vocab(cfg: dict) -> corpus.Vocab:
    return corpus.Vocab.load(require(cfg, "data.vocab"))


def _load_split(cfg: dict, vocab, which: str) -> corpus.Dataset:
    return corpus.load_dataset(
        require(cfg, f"data.{which}"), vocab,
        require(cfg, "data.truncation"), which,
        oracle_sents=get(cfg, "data.oracle_sents", 2))


def _assignments(cfg: dict) -> tuple:
    return tuple(patterns.HeadAssignment.from_dict(d)
                 for d in get(cfg, "patterns.assignments", []))


def _train_config(cfg: dict, assignments) -> trainer.TrainConfig:
    t = dict(require(cfg, "train"))
    t.pop("init_checkpoint", None)
    return trainer.TrainConfig(assignments=assignments, **t)


def _initial_model(cfg: dict) -> Model:
    ckpt = get(cfg, "train.init_checkpoint")
    if ckpt:
        return load_checkpoint(ckpt)
    return init_model(_model_config(cfg), seed=require(cfg, "train.seed"))


def _pal_config(cfg: dict):
    from .pal import PalConfig
    sec = dict(require(cfg, "pal"))
    sec.pop("seed", None)
    return PalConfig.from_dict(sec)


# -- subcommands -------------------------------------------------------------

def cmd_synth(args, cfg) -> int:
    out = _out_dir(args)
    sec = dict(require(cfg, "synth"))
    seed = sec.pop("seed", 0)
    val_fraction = sec.pop("val_fraction", 0.2)
    sc = corpus.SynthConfig(**sec)
    raws = corpus.synth_raw(sc, seed)
    n_val = int(round(len(raws) * val_fraction))
    train_raws = raws[: len(raws) - n_val]
    val_raws = raws[len(raws) - n_val:]
    vocab = corpus.build_vocab(raws, sc.vocab_size)
    corpus.save_jsonl(train_raws, os.path.join(out, "train.jsonl"))
    corpus.save_jsonl(val_raws, os.path.join(out, "val.jsonl"))
    vocab.save(os.path.join(out, "vocab.json"))
    _write_resolved(cfg, out)
    print(f"wrote {len(train_raws)} train / {len(val_raws)} val documents to {out}")
    return 0


def cmd_train(args, cfg) -> int:
    out = _out_dir(args)
    vocab = _load_vocab(cfg)
    train_ds = _load_split(cfg, vocab, "train")
    val_ds = _load_split(cfg, vocab, "val")
    tc = _train_config(cfg, _assignments(cfg))
    model = _initial_model(cfg)
    log, best = trainer.train_run(model, train_ds, val_ds, tc, out_dir=out)
    save_checkpoint(best, os.path.join(out, "best.bin"))
    _write(os.path.join(out, "runlog.json"), canonical_json(log.to_json_obj()))
    _write(os.path.join(out, "timing.json"),
           json.dumps({"wall_clock_s": log.wall_clock_s}))
    _write_resolved(cfg, out)
    print(f"best val loss {log.best['val_loss']:.6f} at step {log.best['step']}")
    return 0


def cmd_importance(args, cfg) -> int:
    out = _out_dir(args)
    model = load_checkpoint(args.checkpoint)
    val_ds = _load_split(cfg, _load_vocab(cfg), "val")
    report = importance_mod.estimate(model, val_ds, args.method)
    _write(os.path.join(out, f"importance_{args.method}.json"),
           importance_mod.report_to_json(report))
    _write_resolved(cfg, out)
    print(f"importance ({args.method}) over {len(val_ds.documents)} documents")
    return 0


def cmd_gr(args, cfg) -> int:
    out = _out_dir(args)
    model = load_checkpoint(args.checkpoint)
    val_ds = _load_split(cfg, _load_vocab(cfg), "val")
    spec = patterns.PatternSpec.load(args.pattern)
    report = patterns.gr_dataset(model, val_ds, spec,
                                 significance=get(cfg, "gr.significance", 0.01))
    _write(os.path.join(out, f"relevance_{spec.name}.json"),
           patterns.relevance_to_json(report))
    _write_resolved(cfg, out)
    kept, heads = patterns.select_pattern(report)
    print(f"pattern {spec.name}: kept={kept} significant_heads={len(heads)}")
    return 0


def cmd_select(args, cfg) -> int:
    out = _out_dir(args)
    with open(args.report) as f:
        rep = json.load(f)
    significant = [{"layer": h["layer"], "head": h["head"], "family": h["family"]}
                   for h in rep["heads"] if h["reject"]]
    verdict = {"pattern": rep["pattern"], "kept": bool(significant),
               "significant": significant}
    _write(os.path.join(out, f"selection_{rep['pattern']['name']}.json"),
           canonical_json(verdict))
    _write_resolved(cfg, out)
    print(f"kept={verdict['kept']} ({len(significant)} significant heads)")
    return 0


def cmd_inject_pal(args, cfg) -> int:
    from .pal import attach_pals
    out = _out_dir(args)
    model = load_checkpoint(args.checkpoint)
    augmented = attach_pals(model, _pal_config(cfg), seed=get(cfg, "pal.seed", 0))
    save_checkpoint(augmented, os.path.join(out, "augmented.bin"))
    _write_resolved(cfg, out)
    print(f"attached {augmented.pal.n_pal_heads} PAL heads per layer")
    return 0


def cmd_ablate(args, cfg) -> int:
    out = _out_dir(args)
    vocab = _load_vocab(cfg)
    train_ds = _load_split(cfg, vocab, "train")
    val_ds = _load_split(cfg, vocab, "val")
    tc = _train_config(cfg, ())
    mc = _model_config(cfg)
    report = trainer.ablation_suite(lambda seed: init_model(mc, seed),
                                    train_ds, val_ds, tc, out_dir=out)
    _write(os.path.join(out, "ablation.json"), canonical_json(report))
    _write_resolved(cfg, out)
    print("ablation cells:", " ".join(
        f"{k}={v['r1']:+.4f}" for k, v in report["cells"].items()))
    return 0


def cmd_compare(args, cfg) -> int:
    out = _out_dir(args)
    vocab = _load_vocab(cfg)
    train_ds = _load_split(cfg, vocab, "train")
    val_ds = _load_split(cfg, vocab, "val")
    tc = _train_config(cfg, ())
    mc = _model_config(cfg)
    pal_cfg = _pal_config(cfg) if get(cfg, "pal") else None
    report = trainer.distill_compare(lambda seed: init_model(mc, seed),
                                     train_ds, val_ds, tc,
                                     pal_config=pal_cfg, out_dir=out)
    _write(os.path.join(out, "compare.json"), canonical_json(report))
    _write_resolved(cfg, out)
    for name, row in report["variants"].items():
        print(f"{name}: r1={row['blocking_off']['r1']:.4f} "
              f"(blocked {row['blocking_on']['r1']:.4f})")
    return 0


def cmd_eval(args, cfg) -> int:
    out = _out_dir(args)
    model = load_checkpoint(args.checkpoint)
    val_ds = _load_split(cfg, _load_vocab(cfg), "val")
    k = get(cfg, "eval.k", 3)
    blocking = args.blocking if args.blocking is not None else get(cfg, "eval.blocking", False)
    means, preds = inference.evaluate(model, val_ds, k=k, blocking=blocking)
    obj = {name: {"precision": sc.precision, "recall": sc.recall, "f1": sc.f1}
           for name, sc in means.items()}
    _write(os.path.join(out, "eval.json"), canonical_json(obj))
    with open(os.path.join(out, "predictions.jsonl"), "w") as f:
        for p in preds:
            f.write(canonical_json(p.to_dict()) + "\n")
    _write_resolved(cfg, out)
    print(f"rouge1_f={obj['rouge1']['f1']:.4f} rouge2_f={obj['rouge2']['f1']:.4f} "
          f"rougel_f={obj['rougel']['f1']:.4f} blocking={blocking}")
    return 0


def cmd_serve(args, cfg) -> int:
    from .service import serve
    serve(cfg)
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attnlab")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **extra_args):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        if name != "serve":
            p.add_argument("--out", required=True)
        for flag, kw in extra_args.items():
            p.add_argument(flag, **kw)
        p.add_argument("overrides", nargs="*", metavar="key=value")
        p.set_defaults(func=fn)
        return p

    add("synth", cmd_synth)
    add("train", cmd_train)
    add("importance", cmd_importance,
        **{"--checkpoint": {"required": True},
           "--method": {"required": True, "choices": ["loo", "sensitivity", "taylor"]}})
    add("gr", cmd_gr, **{"--checkpoint": {"required": True},
                         "--pattern": {"required": True}})
    add("select", cmd_select, **{"--report": {"required": True}})
    add("inject-pal", cmd_inject_pal, **{"--checkpoint": {"required": True}})
    add("ablate", cmd_ablate)
    add("compare", cmd_compare)
    add("eval", cmd_eval, **{"--checkpoint": {"required": True},
                             "--blocking": {"action": argparse.BooleanOptionalAction,
                                            "default": None}})
    add("serve", cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        cfg = load_config(args.config, args.overrides)
        return args.func(args, cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
