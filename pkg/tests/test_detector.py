import json
import random
from pathlib import Path

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import f1_score

from mando.config import RunConfig
from mando.detector import pipeline
from mando.detector.labels import map_line_labels
from mando.detector.manifest import CATEGORIES, load_manifest, select_category
from mando.detector.metrics import aggregate, f1_scores
from mando.detector.split import split
from mando.detector.synthetic import generate_contract, generate_corpus
from mando.errors import LengthMismatch, ManifestError, StratumTooSmall
from mando.hetgraph import HetGraph, SourceSpan
from mando.mgnn import MgnnConfig, MgnnModel

GOLDEN = Path(__file__).parent / "golden"
BANK = GOLDEN / "private_bank.sol"


# -- label mapping -------------------------------------------------------------------


def test_private_bank_line_15_labels():
    c = pipeline.load_contract(BANK, [("private_bank.sol", 15)])
    g = c.graph
    buggy = [g.nodes[i] for i in np.flatnonzero(c.node_labels)]
    assert {(n.node_type, n.name or n.owner) for n in buggy} == {
        ("EXPRESSION", "PrivateBank.CashOut"),
        ("FUNCTION_NAME", "PrivateBank.CashOut"),
    }
    expr = next(n for n in buggy if n.span is not None)
    assert expr.span.line_start == 15
    assert c.unmapped == []


def test_empty_buggy_lines_all_clean():
    c = pipeline.load_contract(BANK, [])
    assert not c.node_labels.any() and not c.buggy


def test_unmapped_lines_reported():
    c = pipeline.load_contract(BANK, [("private_bank.sol", 1), ("private_bank.sol", 15)])
    assert c.unmapped == [("private_bank.sol", 1)]


def _span_graph(rng):
    g = HetGraph("FUSED")
    owners = ["C.f", "C.g"]
    for o in owners:
        g.add_node("FUNCTION_NAME", None, o, name=o)
    g.add_node("FUNCTION_NAME", None, None, name="x.call", external=True)
    for _ in range(rng.randint(1, 25)):
        a = rng.randint(1, 30)
        g.add_node("EXPRESSION", SourceSpan(rng.choice(["a.sol", "b.sol"]), a, a + rng.randint(0, 3)), rng.choice(owners))
    return g


def _interval_oracle(g, lines):
    out = np.zeros(len(g.nodes), dtype=bool)
    for n in g.nodes:
        if n.span is not None:
            out[n.id] = any(f == n.span.file and n.span.line_start <= ln <= n.span.line_end for f, ln in lines)
    for n in g.nodes:
        if n.span is None and not n.external:
            out[n.id] = any(out[m.id] for m in g.nodes if m.span is not None and m.owner == n.name)
    return out


def test_labels_match_interval_oracle():
    rng = random.Random(0)
    for _ in range(100):
        g = _span_graph(rng)
        lines = [(rng.choice(["a.sol", "b.sol"]), rng.randint(1, 35)) for _ in range(rng.randint(0, 4))]
        labels, _ = map_line_labels(g, lines)
        assert np.array_equal(labels, _interval_oracle(g, lines))


def test_labels_monotone():
    rng = random.Random(1)
    for _ in range(50):
        g = _span_graph(rng)
        lines = [("a.sol", rng.randint(1, 35)) for _ in range(3)]
        before, _ = map_line_labels(g, lines[:2])
        after, _ = map_line_labels(g, lines)
        assert not (before & ~after).any()


def test_labels_compare_basenames():
    g = HetGraph("FUSED")
    g.add_node("EXPRESSION", SourceSpan("contracts/a.sol", 3, 3))
    labels, _ = map_line_labels(g, [("/data/a.sol", 3)])
    assert labels.tolist() == [True]


# -- split -------------------------------------------------------------------------


def test_split_ten_and_ten():
    strata = [("R", False)] * 10 + [("R", True)] * 10
    s = split(strata, seed=0)
    assert len(s.train) == 14 and len(s.test) == 6
    assert sum(strata[i][1] for i in s.train) == 7
    assert sum(strata[i][1] for i in s.test) == 3


def test_split_deterministic_disjoint_covering():
    strata = [("R", k % 3 == 0) for k in range(40)]
    a, b = split(strata, seed=5), split(strata, seed=5)
    assert a == b
    assert set(a.train).isdisjoint(a.test)
    assert sorted(a.train + a.test) == list(range(40))
    assert split(strata, seed=6).train != a.train


def test_split_stratum_too_small():
    with pytest.raises(StratumTooSmall):
        split([("R", True), ("R", False), ("R", False)], seed=0)


def test_split_node_ratio_counting_oracle():
    rng = random.Random(2)
    for seed in range(30):
        n = rng.randint(10, 40)
        strata = [("R", k % 2 == 0) for k in range(n)]
        counts = [(rng.randint(5, 40), 0) for _ in range(n)]
        counts = [(t, rng.randint(1, t // 2) if strata[k][1] else 0) for k, (t, _) in enumerate(counts)]
        s = split(strata, seed, node_counts=counts)
        total = sum(t for t, _ in counts)
        ratio = sum(b for _, b in counts) / total

        def side(idx):
            return abs(sum(counts[i][1] for i in idx) / sum(counts[i][0] for i in idx) - ratio)

        assert s.ratio_gap == pytest.approx(max(side(s.train), side(s.test)), abs=1e-12)
        if s.draw < 99:
            assert s.ratio_gap <= 0.05


# -- metrics --------------------------------------------------------------------------


def test_metrics_perfect_and_inverted():
    gold = [True, False] * 5
    r = f1_scores(gold, gold)
    assert r.buggy_f1 == 1.0 and r.macro_f1 == 1.0
    inv = f1_scores([not g for g in gold], gold)
    assert inv.buggy_f1 == 0.0


def test_metrics_hand_computed_confusion():
    pred = [1] * 8 + [1] * 2 + [0] * 2 + [0] * 8
    gold = [1] * 8 + [0] * 2 + [1] * 2 + [0] * 8
    r = f1_scores(pred, gold)
    assert r.buggy_f1 == pytest.approx(0.8, abs=1e-12)
    assert r.macro_f1 == pytest.approx(0.8, abs=1e-12)


def test_metrics_degenerate_flag():
    r = f1_scores([False] * 4, [False] * 4)
    assert r.buggy_f1 == 0.0 and r.degenerate == ["buggy"]
    assert r.f1["clean"] == 1.0


def test_metrics_length_mismatch():
    with pytest.raises(LengthMismatch):
        f1_scores([True], [True, False])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=60))
def test_metrics_against_sklearn(pairs):
    pred = [p for p, _ in pairs]
    gold = [g for _, g in pairs]
    r = f1_scores(pred, gold)
    assert r.buggy_f1 == pytest.approx(f1_score(gold, pred, pos_label=True, zero_division=0), abs=1e-12)
    ref_macro = f1_score(gold, pred, labels=[False, True], average="macro", zero_division=0)
    assert r.macro_f1 == pytest.approx(ref_macro, abs=1e-12)
    assert r.macro_f1 == (r.f1["clean"] + r.f1["buggy"]) / 2
    for v in (*r.precision.values(), *r.recall.values(), *r.f1.values()):
        assert 0.0 <= v <= 1.0


def test_aggregate_mean():
    reports = [f1_scores([1, 0], [1, 0]), f1_scores([0, 1], [1, 0])]
    agg = aggregate(reports)
    assert agg.n_runs == 2 and agg.buggy_f1 == 0.5 and agg.macro_f1 == 0.5


# -- manifest ------------------------------------------------------------------------------


def _write(tmp_path, rows):
    p = tmp_path / "m.jsonl"
    p.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    return p


def test_manifest_loads_and_selects(tmp_path):
    p = _write(
        tmp_path,
        [
            {"path": "a.sol", "category": None, "label": "clean", "buggy_lines": []},
            {"path": "b.sol", "category": "Reentrancy", "label": "buggy", "buggy_lines": [["b.sol", 3]]},
            {"path": "c.sol", "category": "Arithmetic", "label": "buggy", "buggy_lines": [["c.sol", 4]]},
        ],
    )
    entries = load_manifest(p)
    assert entries[1].path == tmp_path / "b.sol"
    assert [e.path.name for e in select_category(entries, "Reentrancy")] == ["a.sol", "b.sol"]
    assert len(CATEGORIES) == 7


@pytest.mark.parametrize(
    "row",
    [
        {"path": "b.sol", "category": "Reentrancy", "label": "buggy", "buggy_lines": []},
        {"path": "b.sol", "category": None, "label": "clean", "buggy_lines": [["b.sol", 1]]},
        {"path": "b.sol", "category": "Nope", "label": "clean"},
        {"path": "b.sol", "category": None, "label": "buggy", "buggy_lines": [["b.sol", 1]]},
        {"category": None, "label": "clean"},
    ],
)
def test_manifest_rejects(tmp_path, row):
    with pytest.raises(ManifestError):
        load_manifest(_write(tmp_path, [row]))


# -- synthetic corpus ----------------------------------------------------------------------


def test_synthetic_motif_lines_map_to_nodes(tmp_path):
    manifest = generate_corpus(tmp_path, n_clean=5, n_planted=5, seed=3)
    entries = load_manifest(manifest)
    assert len(entries) == 15
    for e in entries:
        c = pipeline.load_contract(e.path, e.buggy_lines, e.category, e.is_buggy)
        assert c.unmapped == []
        assert c.node_labels.any() == e.is_buggy


def test_synthetic_reentrancy_marks_the_call():
    rng = np.random.default_rng(0)
    c = generate_contract("X", rng, "Reentrancy")
    (line,) = c.buggy_lines
    assert "call.value" in c.source.splitlines()[line - 1]


# -- pipeline gating and reporting ---------------------------------------------------------------


def _constant_model(vocab, paths, buggy: bool):
    m = MgnnModel(MgnnConfig(dropout=0.0), vocab, paths, seed=0)
    with torch.no_grad():
        m.mlp_w2.zero_()
        m.mlp_b2.copy_(torch.tensor([-50.0, 50.0] if buggy else [50.0, -50.0]))
    return m


def test_clean_prediction_gates_fine_phase():
    c = pipeline.load_contract(BANK, [("private_bank.sol", 15)])
    cfg = RunConfig()
    pipeline.featurize([c], cfg, vocab=sorted(c.graph.node_types))
    vocab, paths = pipeline.model_space([c])
    models = {"coarse": _constant_model(vocab, paths, False), "fine": _constant_model(vocab, paths, True)}
    (d,) = pipeline.detect(models, [c], cfg, "Reentrancy")
    assert not d.buggy and d.findings == []
    models["coarse"] = _constant_model(vocab, paths, True)
    (d,) = pipeline.detect(models, [c], cfg, "Reentrancy")
    assert d.buggy and d.findings


def test_oracle_fine_model_reports_line_15(monkeypatch):
    c = pipeline.load_contract(BANK, [("private_bank.sol", 15)])
    cfg = RunConfig()
    pipeline.featurize([c], cfg, vocab=sorted(c.graph.node_types))
    vocab, paths = pipeline.model_space([c])

    def oracle(model, contracts, task):
        return np.array([1.0]) if task == "coarse" else contracts[0].node_labels.astype(float)

    monkeypatch.setattr(pipeline, "infer", oracle)
    models = {"coarse": None, "fine": None}
    (d,) = pipeline.detect(models, [c], cfg, "Reentrancy")
    assert [(f["line_start"], f["line_end"]) for f in d.findings] == [(15, 15)]
    assert "line_start" in pipeline.report_csv([d]).splitlines()[0]
    data = json.loads(pipeline.report_json([d]))
    assert data["findings"][0]["line_start"] == 15


def test_majority_baseline():
    c = pipeline.load_contract(BANK, [("private_bank.sol", 15)])
    base = pipeline.majority_baseline([c])
    assert base == {"fine_buggy_f1": 0.0, "predicts_buggy": False}
