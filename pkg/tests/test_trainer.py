import json
import os

import numpy as np
import pytest

from attnlab.corpus import SynthConfig, synth_generate
from attnlab.model import ModelConfig, init_model
from attnlab.pal import PalConfig, attach_pals
from attnlab.patterns import PatternSpec
from attnlab.runconfig import canonical_json
from attnlab.trainer import (OptimizerState, TrainConfig, adam_step,
                             ablation_suite, distill_compare, lr_at,
                             subset_assignments, train_run)


@pytest.fixture(scope="module")
def data():
    ds = synth_generate(SynthConfig(20, 3, 4, 50), seed=41)
    train = ds
    import dataclasses
    val = dataclasses.replace(ds, split="val", documents=ds.documents[:6])
    return train, val


def mk_model(seed=0):
    return init_model(ModelConfig(1, 4, 8, 16, 32, 50), seed=seed)


def cfg(**kw):
    base = dict(steps=10, validate_every=5, batch_size=4, grad_accum=1,
                warmup=2, peak_lr=1e-2, seed=3, top_k=2, eval_k=2)
    base.update(kw)
    return TrainConfig(**base)


def test_lr_branches_meet_at_warmup():
    w = 50
    assert lr_at(w, w, 1.0) == pytest.approx(w ** -0.5, rel=1e-12)
    assert lr_at(w, w, 1.0) == pytest.approx(w * w ** -1.5, rel=1e-12)


def test_lr_hand_value():
    assert lr_at(1, 10000, 2e-3) == pytest.approx(2e-9, rel=1e-12)


def test_lr_monotone():
    w = 100
    vals = [lr_at(s, w, 1.0) for s in range(1, 301)]
    assert all(a <= b + 1e-15 for a, b in zip(vals[:w - 1], vals[1:w]))
    assert all(a >= b - 1e-15 for a, b in zip(vals[w - 1:-1], vals[w:]))


def test_lr_rejects_step_zero():
    with pytest.raises(ValueError):
        lr_at(0, 10, 1.0)


def test_adam_first_step_is_signed_lr():
    params = {"w": np.array([5.0])}
    grads = {"w": np.array([3.0])}
    state = OptimizerState()
    adam_step(params, grads, state, lr=0.1, beta1=0.9, beta2=0.999, eps=1e-12)
    assert params["w"][0] == pytest.approx(5.0 - 0.1, abs=1e-9)


def test_adam_zero_gradient_no_move():
    params = {"w": np.arange(4.0)}
    before = params["w"].copy()
    state = OptimizerState()
    adam_step(params, {"w": np.zeros(4)}, state, 0.1, 0.9, 0.999, 1e-8)
    np.testing.assert_array_equal(params["w"], before)


def test_adam_rejects_non_finite():
    params = {"w": np.zeros(2)}
    with pytest.raises(ValueError, match="non-finite gradient"):
        adam_step(params, {"w": np.array([1.0, np.nan])}, OptimizerState(),
                  0.1, 0.9, 0.999, 1e-8)


def test_adam_deterministic():
    rng = np.random.default_rng(0)
    g = rng.normal(size=8)
    out = []
    for _ in range(2):
        params = {"w": np.ones(8)}
        state = OptimizerState()
        for _ in range(5):
            adam_step(params, {"w": g}, state, 0.01, 0.9, 0.999, 1e-8)
        out.append(params["w"].tobytes())
    assert out[0] == out[1]


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(steps=4, validate_every=5)
    with pytest.raises(ValueError):
        TrainConfig(steps=10, validate_every=5, beta1=1.0)
    with pytest.raises(ValueError):
        TrainConfig(steps=10, validate_every=5, top_k=0)


def test_train_run_bitwise_reproducible(data):
    train, val = data
    outs = []
    for _ in range(2):
        log, best = train_run(mk_model(), train, val, cfg(steps=50, validate_every=10))
        outs.append((canonical_json(log.to_json_obj()),
                     b"".join(best.params[k].tobytes() for k in sorted(best.params))))
    assert outs[0] == outs[1]


def test_train_run_empty_assignments_is_vanilla(data):
    train, val = data
    log_a, best_a = train_run(mk_model(), train, val, cfg())
    log_b, best_b = train_run(mk_model(), train, val, cfg(assignments=()))
    assert canonical_json(log_a.to_json_obj()) == canonical_json(log_b.to_json_obj())
    for k in best_a.params:
        assert np.array_equal(best_a.params[k], best_b.params[k])


def test_train_run_requires_labels(data):
    train, val = data
    import copy
    broken = copy.deepcopy(train)
    broken.documents[0].oracle_labels = None
    with pytest.raises(ValueError, match="missing labels"):
        train_run(mk_model(), broken, val, cfg())


def test_gradient_accumulation_equals_union(data):
    train, val = data
    _, best1 = train_run(mk_model(), train, val, cfg(grad_accum=1))
    _, best2 = train_run(mk_model(), train, val, cfg(grad_accum=4))
    for k in best1.params:
        np.testing.assert_allclose(best1.params[k], best2.params[k], atol=1e-6)


def test_top_k_checkpoints_on_disk(data, tmp_path):
    train, val = data
    log, _ = train_run(mk_model(), train, val,
                       cfg(steps=30, validate_every=5, top_k=3),
                       out_dir=str(tmp_path))
    files = sorted(f for f in os.listdir(tmp_path) if f.startswith("ckpt-"))
    assert len(files) == 3
    assert sorted(c["path"] for c in log.checkpoints) == files
    losses = [c["val_loss"] for c in log.checkpoints]
    assert losses == sorted(losses)
    assert log.best["val_loss"] == losses[0]


def test_train_with_assignments_carries_meta(data):
    train, val = data
    assignments = (subset_assignments("m"))
    _, best = train_run(mk_model(), train, val, cfg(assignments=assignments))
    assert best.meta["assignments"] == [a.to_dict() for a in assignments]


def test_freeze_base_only_updates_pal(data):
    train, val = data
    base = mk_model()
    pal_cfg = PalConfig(4, 4, (PatternSpec("m", "matching_token"), None, None, None),
                        freeze_base=True)
    augmented = attach_pals(base, pal_cfg, seed=1)
    _, best = train_run(augmented, train, val, cfg())
    for name in best.params:
        if name.startswith("pal"):
            continue
        np.testing.assert_array_equal(best.params[name], augmented.params[name])
    assert any(not np.array_equal(best.params[n], augmented.params[n])
               for n in best.params if n.startswith("pal"))


def test_subset_assignment_layout():
    full = subset_assignments("all")
    got = {(a.head, a.pattern.kind, a.pattern.offset) for a in full}
    assert got == {(0, "matching_token", None), (1, "intra_sentence", None),
                   (2, "relative_position", -1), (3, "relative_position", 1)}
    assert subset_assignments("none") == ()
    assert {a.head for a in subset_assignments("m+p")} == {0, 2, 3}


def test_ablation_enumerates_powerset(data, tmp_path):
    train, val = data
    report = ablation_suite(mk_model, train, val,
                            cfg(steps=4, validate_every=4, batch_size=2),
                            out_dir=str(tmp_path))
    assert set(report["cells"]) == {"none", "m", "i", "p", "m+i", "m+p", "i+p", "all"}
    assert report["cells"]["none"] == {"r1": 0.0, "r2": 0.0, "rl": 0.0}


def test_ablation_rejects_too_few_heads(data):
    train, val = data
    factory = lambda seed: init_model(ModelConfig(1, 2, 8, 16, 32, 50), seed=seed)
    with pytest.raises(ValueError, match="fewer heads"):
        ablation_suite(factory, train, val, cfg(steps=4, validate_every=4))


def test_distill_compare_report_shape(data, tmp_path):
    train, val = data
    report = distill_compare(mk_model, train, val,
                             cfg(steps=4, validate_every=4, batch_size=2),
                             out_dir=str(tmp_path))
    assert set(report["variants"]) == {"baseline", "pattern", "pal"}
    for row in report["variants"].values():
        assert set(row) == {"blocking_on", "blocking_off"}
        for triple in row.values():
            assert set(triple) == {"r1", "r2", "rl"}
