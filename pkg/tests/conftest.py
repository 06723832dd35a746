import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from attnlab import corpus
from attnlab.model import ModelConfig, init_model


def build_doc(sentences, summary=(), max_len=512, vocab_size=200):
    """Encode hand-written sentence strings into a Document (own tiny vocab)."""
    raw = corpus.RawDocument("d0", list(sentences), list(summary))
    vocab = corpus.build_vocab([raw], max_size=vocab_size)
    return corpus.encode_document(raw, vocab, max_len), vocab


@pytest.fixture
def make_doc():
    return build_doc


@pytest.fixture(scope="session")
def small_ds():
    """8 short synthetic documents with oracle labels."""
    cfg = corpus.SynthConfig(n_docs=8, sents_per_doc=3, tokens_per_sent=4,
                             vocab_size=40)
    return corpus.synth_generate(cfg, seed=11)


@pytest.fixture(scope="session")
def small_model(small_ds):
    """2-layer 2-head model with non-trivial weights (init + noise)."""
    cfg = ModelConfig(n_layers=2, n_heads=2, d_model=8, d_ff=16, max_len=64,
                      vocab_size=small_ds.vocab.size)
    m = init_model(cfg, seed=3)
    rng = np.random.default_rng(5)
    for arr in m.params.values():
        arr += rng.normal(0.0, 0.25, size=arr.shape)
    return m


BASE_CONFIG = {
    "model": {"n_layers": 2, "n_heads": 2, "d_model": 8, "d_ff": 16,
              "max_len": 32, "vocab_size": 40, "dropout": 0.0},
    "train": {"steps": 12, "validate_every": 6, "batch_size": 4,
              "grad_accum": 1, "warmup": 2, "peak_lr": 5e-3,
              "beta1": 0.9, "beta2": 0.999, "eps": 1e-8, "seed": 5,
              "top_k": 2, "eval_k": 2, "eval_blocking": False},
    "synth": {"n_docs": 30, "sents_per_doc": 3, "tokens_per_sent": 4,
              "vocab_size": 40, "repeat_signal": True, "gold_sents": 2,
              "n_keys": 2, "seed": 9, "val_fraction": 0.2},
    "eval": {"k": 2, "blocking": False},
}


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    """Synth data + one trained checkpoint, produced through the real CLI."""
    import json

    from attnlab import cli

    root = tmp_path_factory.mktemp("artifacts")
    data_dir = root / "data"
    run_dir = root / "run"
    cfg = json.loads(json.dumps(BASE_CONFIG))
    cfg["data"] = {"train": str(data_dir / "train.jsonl"),
                   "val": str(data_dir / "val.jsonl"),
                   "vocab": str(data_dir / "vocab.json"),
                   "truncation": 32, "oracle_sents": 2}
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    assert cli.main(["synth", "--config", str(cfg_path), "--out", str(data_dir)]) == 0
    assert cli.main(["train", "--config", str(cfg_path), "--out", str(run_dir)]) == 0
    return {"root": root, "config": cfg_path, "cfg": cfg, "data": data_dir,
            "run": run_dir, "checkpoint": run_dir / "best.bin"}
