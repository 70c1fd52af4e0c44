"""Two-phase detection: contract classification, then node classification of flagged contracts."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from mando.config import RunConfig
from mando.detector.labels import map_line_labels
from mando.detector.manifest import ManifestEntry, select_category
from mando.detector.metrics import MetricsReport, aggregate, f1_scores
from mando.detector.split import split
from mando.errors import MandoError
from mando.frontend import load_bundle
from mando.hetgraph import HetGraph, fuse
from mando.metapath import MetapathCatalog, extract_catalog
from mando.mgnn.batch import GraphInput, encode_batch, paths_of, vocabulary_of
from mando.mgnn.model import MgnnModel
from mando.mgnn.train import predict_proba, train
from mando.topoembed import node_features

REPORT_COLUMNS = ("contract", "file", "line_start", "line_end", "category", "confidence")


@dataclass
class Contract:
    """A parsed contract with its fused graph and gold labels."""

    name: str
    source: Path
    graph: HetGraph
    catalog: MetapathCatalog
    node_labels: np.ndarray
    buggy: bool
    category: Optional[str] = None
    unmapped: list = field(default_factory=list)
    features: Optional[np.ndarray] = None

    @property
    def node_counts(self) -> tuple[int, int]:
        return len(self.graph.nodes), int(self.node_labels.sum())


def load_contract(path: str | Path, buggy_lines=(), category: Optional[str] = None, buggy: Optional[bool] = None) -> Contract:
    path = Path(path)
    bundle = load_bundle(path)
    g = fuse(bundle).graph
    labels, unmapped = map_line_labels(g, buggy_lines)
    return Contract(
        name=bundle.contract,
        source=path,
        graph=g,
        catalog=extract_catalog(g),
        node_labels=labels,
        buggy=bool(buggy_lines) if buggy is None else buggy,
        category=category,
        unmapped=unmapped,
    )


def load_entries(entries: Sequence[ManifestEntry]) -> list[Contract]:
    return [load_contract(e.path, e.buggy_lines, e.category, e.is_buggy) for e in entries]


def featurize(contracts: Sequence[Contract], cfg: RunConfig, vocab: Optional[Sequence[str]] = None, seed: int = 0):
    """Fill ``features``; one-hot features index the shared ``vocab``."""
    for c in contracts:
        if cfg.feature_method == "onehot":
            c.features = node_features(c.graph, "onehot", cfg.walk_config(seed), vocabulary=vocab)
        else:
            c.features = node_features(c.graph, cfg.feature_method, cfg.walk_config(seed), catalog=c.catalog)


def _inputs(contracts: Sequence[Contract]) -> list[GraphInput]:
    return [GraphInput(c.graph, c.features, c.catalog) for c in contracts]


@dataclass
class PhaseResult:
    model: MgnnModel
    probs: np.ndarray
    preds: np.ndarray
    history: dict
    seconds: float


def _fit(task: str, contracts: Sequence[Contract], cfg: RunConfig, seed: int, vocab, paths) -> tuple[MgnnModel, dict]:
    inputs = _inputs(contracts)
    batch = encode_batch(inputs, vocab, paths)
    if task == "coarse":
        labels = torch.tensor([int(c.buggy) for c in contracts])
    else:
        labels = torch.from_numpy(np.concatenate([c.node_labels for c in contracts]).astype(np.int64))
    model = MgnnModel(cfg.model_config(), vocab, paths, seed=seed)
    history = train(model, batch, labels, cfg.train_config(task, seed))
    return model, history.to_dict()


def model_space(contracts: Sequence[Contract]) -> tuple[list[str], list]:
    """Node-type vocabulary and metapath list of a training set."""
    inputs = _inputs(contracts)
    return vocabulary_of(inputs), paths_of(inputs)


def infer(model: MgnnModel, contracts: Sequence[Contract], task: str) -> np.ndarray:
    if not contracts:
        return np.zeros(0)
    batch = encode_batch(_inputs(contracts), model.vocab, model.paths)
    return predict_proba(model, batch, task)


def run_coarse(train_set, test_set, cfg: RunConfig, seed: int, vocab, paths) -> PhaseResult:
    start = time.perf_counter()
    model, history = _fit("coarse", train_set, cfg, seed, vocab, paths)
    probs = infer(model, test_set, "coarse")
    return PhaseResult(model, probs, probs >= cfg.threshold, history, time.perf_counter() - start)


def run_fine(train_set, test_set, cfg: RunConfig, seed: int, vocab, paths) -> PhaseResult:
    """Train on gold-buggy contracts; per-node probabilities for ``test_set`` (concatenated)."""
    start = time.perf_counter()
    model, history = _fit("fine", [c for c in train_set if c.buggy], cfg, seed, vocab, paths)
    probs = infer(model, test_set, "fine")
    return PhaseResult(model, probs, probs >= cfg.threshold, history, time.perf_counter() - start)


# -- evaluation ------------------------------------------------------------------


@dataclass
class SeedResult:
    seed: int
    coarse: Optional[MetricsReport]
    fine: Optional[MetricsReport]
    fine_ungated: Optional[MetricsReport]
    timings: dict


def evaluate_seed(contracts: Sequence[Contract], cfg: RunConfig, seed: int) -> SeedResult:
    """One split/train/test run over a single category's contracts."""
    parts = split(
        [(c.category or "", c.buggy) for c in contracts],
        seed,
        cfg.train_frac,
        [c.node_counts for c in contracts],
        cfg.split_tolerance,
    )
    train_set = [contracts[i] for i in parts.train]
    test_set = [contracts[i] for i in parts.test]
    vocab, paths = model_space(train_set)
    if cfg.feature_method == "onehot":
        featurize(contracts, cfg, vocab, seed)
    timings = {}
    coarse = fine = ungated = None
    gate = np.ones(len(test_set), dtype=bool)
    if cfg.task in ("coarse", "both"):
        res = run_coarse(train_set, test_set, cfg, seed, vocab, paths)
        timings["coarse_train"] = res.seconds
        coarse = f1_scores(res.preds, [c.buggy for c in test_set])
        gate = res.preds.astype(bool)
    if cfg.task in ("fine", "both"):
        # end-to-end: contracts flagged by phase 1 or gold buggy; unflagged ones predict all-clean
        picked = [i for i, c in enumerate(test_set) if gate[i] or c.buggy]
        scanned = [test_set[i] for i in picked]
        res = run_fine(train_set, scanned, cfg, seed, vocab, paths)
        timings["fine_train"] = res.seconds
        flags = _per_node([np.full(len(c.graph.nodes), gate[i]) for i, c in zip(picked, scanned)])
        gold = _per_node([c.node_labels for c in scanned])
        gold_buggy = _per_node([np.full(len(c.graph.nodes), c.buggy) for c in scanned])
        fine = f1_scores(res.preds & flags, gold)
        ungated = f1_scores(res.preds[gold_buggy], gold[gold_buggy])
    return SeedResult(seed, coarse, fine, ungated, timings)


def _per_node(parts: list[np.ndarray]) -> np.ndarray:
    return np.concatenate(parts).astype(bool) if parts else np.zeros(0, dtype=bool)


def evaluate_category(entries: Sequence[ManifestEntry], category: str, cfg: RunConfig, seeds: Sequence[int]) -> dict:
    """Multi-seed evaluation of one category: per-seed and mean metrics."""
    selected = select_category(list(entries), category)
    if not selected:
        raise MandoError(f"no entries for category {category}")
    contracts = load_entries(selected)
    if cfg.feature_method != "onehot":
        featurize(contracts, cfg, seed=cfg.seed)
    runs = [evaluate_seed(contracts, cfg, s) for s in seeds]
    out: dict = {"category": category, "contracts": len(contracts), "seeds": list(seeds)}
    for key in ("coarse", "fine", "fine_ungated"):
        reports = [getattr(r, key) for r in runs if getattr(r, key) is not None]
        if reports:
            out[key] = aggregate(reports).to_dict()
    out["majority_baseline"] = majority_baseline(contracts)
    out["timings"] = [r.timings for r in runs]
    return out


def majority_baseline(contracts: Sequence[Contract]) -> dict:
    """Buggy-F1 of constant predictors at node level over gold-buggy contracts."""
    gold = np.concatenate([c.node_labels for c in contracts if c.buggy]) if any(c.buggy for c in contracts) else np.zeros(0, bool)
    majority = bool(gold.mean() > 0.5) if gold.size else False
    return {"fine_buggy_f1": f1_scores(np.full(gold.shape, majority), gold).buggy_f1, "predicts_buggy": majority}


# -- detection and reports -------------------------------------------------------


@dataclass
class Detection:
    contract: str
    file: str
    buggy: bool
    confidence: float
    findings: list[dict]


def detect(
    models: dict[str, MgnnModel], contracts: Sequence[Contract], cfg: RunConfig, category: Optional[str]
) -> list[Detection]:
    """Phase 1 flags contracts; phase 2 scans only flagged ones and reports their buggy lines."""
    out = []
    for c in contracts:
        if "coarse" in models:
            conf = float(infer(models["coarse"], [c], "coarse")[0])
            flagged = conf >= cfg.threshold
        else:
            conf, flagged = 1.0, True
        findings: list[dict] = []
        if flagged and "fine" in models:
            probs = infer(models["fine"], [c], "fine")
            best: dict[tuple[str, int, int], float] = {}
            for node, p in zip(c.graph.nodes, probs):
                if p >= cfg.threshold and node.span is not None:
                    key = (node.span.file, node.span.line_start, node.span.line_end)
                    best[key] = max(best.get(key, 0.0), float(p))
            findings = [
                {
                    "contract": c.name,
                    "file": f,
                    "line_start": a,
                    "line_end": b,
                    "category": category or "",
                    "confidence": round(conf_, 6),
                }
                for (f, a, b), conf_ in sorted(best.items())
            ]
        out.append(Detection(c.name, str(c.source), bool(flagged), round(conf, 6), findings))
    return out


def report_json(detections: Sequence[Detection]) -> str:
    data = {
        "contracts": [
            {"contract": d.contract, "file": d.file, "buggy": d.buggy, "confidence": d.confidence} for d in detections
        ],
        "findings": [row for d in detections for row in d.findings],
    }
    return json.dumps(data, sort_keys=True, indent=1) + "\n"


def report_csv(detections: Sequence[Detection]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for d in detections:
        writer.writerows(d.findings)
    return buf.getvalue()
