import math

import numpy as np
import pytest

from attnlab import kernels
from attnlab.model import HeadId
from attnlab.patterns import (HeadAssignment, PatternSpec, TTestResult,
                              assignment_constraints, build_constraint,
                              constraint_matrix, gr_dataset, gr_example,
                              indicator, relevance_to_json, select_pattern,
                              t_test_head, t_upper_tail)

from conftest import build_doc
from oracles import ref_gr, ref_t_upper_tail


def bits(ind):
    return set(zip(*np.nonzero(ind)))


def test_pattern_spec_validation():
    with pytest.raises(ValueError):
        PatternSpec("x", "relative_position", 0)
    with pytest.raises(ValueError):
        PatternSpec("x", "relative_position")
    with pytest.raises(ValueError):
        PatternSpec("x", "matching_token", 1)
    with pytest.raises(ValueError):
        PatternSpec("x", "nope")


def test_matching_indicator_aba():
    # flat = [BOS a b a EOS]; only the two 'a' positions fire
    doc, _ = build_doc(["a b a"])
    ind = indicator(PatternSpec("m", "matching_token"), doc)
    assert bits(ind) == {(1, 1), (1, 3), (3, 1), (3, 3)}


def test_matching_indicator_ignores_specials():
    doc, _ = build_doc(["a b", "c d"])  # two BOS and two EOS, all tokens unique
    ind = indicator(PatternSpec("m", "matching_token"), doc)
    assert bits(ind) == set()


def test_intra_indicator_block_diagonal():
    doc, _ = build_doc(["a b", "c d"])  # spans (0,4), (4,8)
    ind = indicator(PatternSpec("i", "intra_sentence"), doc)
    expect = np.zeros((8, 8), dtype=np.uint8)
    expect[0:4, 0:4] = 1
    expect[4:8, 4:8] = 1
    np.testing.assert_array_equal(ind, expect)


def test_positional_indicator():
    doc, _ = build_doc(["a"])  # length 3: BOS a EOS
    ind = indicator(PatternSpec("p", "relative_position", 1), doc)
    assert bits(ind) == {(0, 1), (1, 2)}
    ind = indicator(PatternSpec("p", "relative_position", -1), doc)
    assert bits(ind) == {(1, 0), (2, 1)}


def test_matching_constraint_all_distinct_is_unconstrained():
    doc, _ = build_doc(["a b c"])
    con = build_constraint(PatternSpec("m", "matching_token"), doc)
    assert con.kind == "mask"
    np.testing.assert_array_equal(con.mask, np.ones((doc.n, doc.n), dtype=np.uint8))


def test_matching_constraint_aba_rows():
    doc, _ = build_doc(["a b a"])  # flat [BOS a b a EOS]
    con = build_constraint(PatternSpec("m", "matching_token"), doc)
    n = doc.n
    for row in (0, 2, 4):  # BOS, b, EOS rows unconstrained
        np.testing.assert_array_equal(con.mask[row], np.ones(n, dtype=np.uint8))
    for row in (1, 3):  # 'a' rows attend only to 'a's
        expect = np.zeros(n, dtype=np.uint8)
        expect[[1, 3]] = 1
        np.testing.assert_array_equal(con.mask[row], expect)


def test_matching_constraint_never_empty_rows():
    rng = np.random.default_rng(0)
    words = [f"w{i}" for i in range(6)]
    for _ in range(25):
        sents = [" ".join(words[i] for i in rng.integers(0, 6, size=rng.integers(1, 5)))
                 for _ in range(rng.integers(1, 4))]
        doc, _ = build_doc(sents)
        con = build_constraint(PatternSpec("m", "matching_token"), doc)
        assert (con.mask.sum(axis=1) > 0).all()


def test_positional_constraint_boundary_maps_to_self():
    doc, _ = build_doc(["a"])  # length 3
    con = build_constraint(PatternSpec("p", "relative_position", -1), doc)
    assert con.kind == "fixed"
    assert con.targets.tolist() == [0, 0, 1]
    con = build_constraint(PatternSpec("p", "relative_position", 1), doc)
    assert con.targets.tolist() == [1, 2, 2]


def test_gr_example_identity_on_aba():
    tokens = np.array([0, 1, 0], dtype=np.int64)
    ind = kernels.match_indicator(tokens, np.zeros(3, dtype=bool))
    assert gr_example(np.eye(3), ind, 3) == pytest.approx(2 / 3, abs=0)


def test_gr_example_uniform_intra():
    ind = np.zeros((4, 4), dtype=np.uint8)
    ind[0:2, 0:2] = 1
    ind[2:4, 2:4] = 1
    alpha = np.full((4, 4), 0.25)
    assert gr_example(alpha, ind, 4) == pytest.approx(0.5, abs=0)


def test_gr_example_all_ones_and_all_zero():
    rng = np.random.default_rng(1)
    alpha = rng.random((5, 5))
    alpha /= alpha.sum(axis=1, keepdims=True)
    assert gr_example(alpha, np.ones((5, 5), dtype=np.uint8), 5) == pytest.approx(1.0, abs=1e-9)
    assert gr_example(alpha, np.zeros((5, 5), dtype=np.uint8), 5) == 0.0


def test_gr_example_bounds_fuzz():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(1, 10))
        alpha = rng.random((n, n)) + 1e-9
        alpha /= alpha.sum(axis=1, keepdims=True)
        ind = (rng.random((n, n)) < 0.5).astype(np.uint8)
        g = gr_example(alpha, ind, n)
        assert 0.0 <= g <= 1.0 + 1e-12


def test_gr_example_shape_mismatch():
    with pytest.raises(ValueError):
        gr_example(np.eye(3), np.ones((2, 2), dtype=np.uint8), 3)


def test_pattern_mass_on_own_constraint(small_model, small_ds):
    """A head constrained by a pattern puts all its mass on the constraint's
    realized matrix: >= 1 - 1e-3 for masks, exactly 1 for fixed maps."""
    specs = [PatternSpec("m", "matching_token"),
             PatternSpec("i", "intra_sentence"),
             PatternSpec("prev", "relative_position", -1),
             PatternSpec("next", "relative_position", 1)]
    for doc in small_ds.documents[:4]:
        for spec in specs:
            con = build_constraint(spec, doc)
            hid = HeadId(0, 0)
            trace = small_model.forward(doc, constraints={hid: con})
            mass = gr_example(trace.attention[hid],
                              constraint_matrix(con, doc.n), doc.n)
            if con.kind == "fixed":
                assert mass == 1.0
            else:
                assert mass >= 1.0 - 1e-3


def test_gr_dataset_matches_bruteforce(small_model, small_ds):
    doc_preds = {
        "matching_token": lambda doc: _match_pred(doc),
        "intra_sentence": lambda doc: _intra_pred(doc),
    }
    for kind, make_pred in doc_preds.items():
        spec = PatternSpec(kind[:2], kind)
        report = gr_dataset(small_model, small_ds, spec)
        for hid in report.head_order:
            expected = []
            for doc in small_ds.documents:
                trace = small_model.forward(doc)
                expected.append(ref_gr(trace.attention[hid], make_pred(doc), doc.n))
            assert report.gr[hid] == pytest.approx(np.mean(expected), abs=1e-8)
        assert report.population_mean == pytest.approx(
            np.mean([report.gr[h] for h in report.head_order]), abs=1e-12)


def _match_pred(doc):
    flat = doc.flat.tolist()
    special = doc.special_mask().tolist()
    def pred(i, j):
        if special[i] or special[j]:
            return False
        freq = sum(1 for t, sp in zip(flat, special) if not sp and t == flat[i])
        return freq > 1 and flat[i] == flat[j]
    return pred


def _intra_pred(doc):
    def pred(i, j):
        return any(s <= i < e and s <= j < e for s, e in doc.spans)
    return pred


def test_gr_dataset_single_head_population_mean(small_ds):
    from attnlab.model import ModelConfig, init_model
    solo = init_model(ModelConfig(1, 1, 8, 16, 64, small_ds.vocab.size), seed=1)
    report = gr_dataset(solo, small_ds, PatternSpec("i", "intra_sentence"))
    only = report.head_order[0]
    assert report.population_mean == pytest.approx(report.gr[only], abs=1e-15)


def test_gr_dataset_requires_documents(small_model, small_ds):
    import dataclasses
    empty = dataclasses.replace(small_ds, documents=[])
    with pytest.raises(ValueError, match="empty dataset"):
        gr_dataset(small_model, empty, PatternSpec("m", "matching_token"))


def test_gr_dataset_report_invariants(small_model, small_ds):
    report = gr_dataset(small_model, small_ds, PatternSpec("i", "intra_sentence"))
    for hid in report.head_order:
        assert report.gr[hid] == pytest.approx(np.mean(report.samples[hid]), abs=1e-12)
        assert all(0.0 <= s <= 1.0 + 1e-9 for s in report.samples[hid])
        if report.tests[hid].reject:
            assert report.tests[hid].p < report.significance
    # serialization is canonical and stable
    assert relevance_to_json(report) == relevance_to_json(report)


def test_t_test_all_equal_to_mu0():
    r = t_test_head([0.4] * 5, 0.4)
    assert r.t == 0.0 and r.p == 0.5 and not r.reject


def test_t_test_hand_derived_t8():
    d = math.sqrt(0.15 / 16)  # 16 samples, mean 0.5, sample std exactly 0.1
    samples = [0.5 - d] * 8 + [0.5 + d] * 8
    r = t_test_head(samples, 0.3)
    assert r.t == pytest.approx(8.0, rel=1e-9)
    assert r.df == 15
    assert r.p < 1e-6 and r.reject


def test_t_test_calibration_boundary():
    for t, df in ((2.821, 9), (2.602, 15)):
        p = t_upper_tail(t, df)
        assert p == pytest.approx(0.010, abs=5e-4)
        assert p == pytest.approx(ref_t_upper_tail(t, df), abs=1e-6)


def test_t_test_negative_t():
    r = t_test_head([0.1, 0.2, 0.15, 0.12], 0.5)
    assert r.t < 0 and r.p > 0.5 and not r.reject


def test_t_test_insufficient_samples():
    with pytest.raises(ValueError, match="insufficient samples"):
        t_test_head([0.4], 0.3)


def test_t_test_zero_variance_above_mu0():
    r = t_test_head([0.9] * 4, 0.1)
    assert r.p == 0.0 and r.reject


def test_select_pattern():
    spec = PatternSpec("m", "matching_token")
    heads = (HeadId(0, 0), HeadId(0, 1))
    mk = lambda rejects: {
        h: TTestResult(1.0, 3, 0.001 if rej else 0.4, rej)
        for h, rej in zip(heads, rejects)
    }
    base = dict(pattern=spec, head_order=heads,
                gr={h: 0.5 for h in heads}, samples={h: [0.5] for h in heads},
                population_mean=0.5, significance=0.01)
    from attnlab.patterns import RelevanceReport
    kept, sig = select_pattern(RelevanceReport(tests=mk([False, False]), **base))
    assert not kept and sig == []
    kept, sig = select_pattern(RelevanceReport(tests=mk([False, True]), **base))
    assert kept and sig == [HeadId(0, 1)]


def test_assignment_constraints_all_layers():
    doc, _ = build_doc(["a b a", "c d"])
    asg = (HeadAssignment(0, PatternSpec("m", "matching_token")),
           HeadAssignment(1, PatternSpec("next", "relative_position", 1), layer=1))
    cons = assignment_constraints(asg, n_layers=2, doc=doc)
    assert set(cons) == {HeadId(0, 0), HeadId(1, 0), HeadId(1, 1)}
    assert cons[HeadId(0, 0)].kind == "mask"
    assert cons[HeadId(1, 1)].kind == "fixed"


def test_assignment_round_trip():
    asg = HeadAssignment(2, PatternSpec("prev", "relative_position", -1), layer=3)
    assert HeadAssignment.from_dict(asg.to_dict()) == asg
