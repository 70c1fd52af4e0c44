"""Buggy-class F1, Macro-F1 and multi-seed aggregation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from mando.errors import LengthMismatch

CLASSES = ("clean", "buggy")


@dataclass
class MetricsReport:
    buggy_f1: float
    macro_f1: float
    precision: dict[str, float]
    recall: dict[str, float]
    f1: dict[str, float]
    support: dict[str, int]
    # classes whose F1 was undefined (no predictions and no gold members) and reported as 0
    degenerate: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def f1_scores(pred: Sequence, gold: Sequence) -> MetricsReport:
    p = np.asarray(pred, dtype=bool).reshape(-1)
    g = np.asarray(gold, dtype=bool).reshape(-1)
    if p.shape != g.shape:
        raise LengthMismatch(f"{p.size} predictions for {g.size} gold labels")
    precision, recall, f1, support, degenerate = {}, {}, {}, {}, []
    for name, positive in (("clean", False), ("buggy", True)):
        pp, gg = p == positive, g == positive
        tp = int(np.sum(pp & gg))
        n_pred, n_gold = int(pp.sum()), int(gg.sum())
        precision[name] = _ratio(tp, n_pred)
        recall[name] = _ratio(tp, n_gold)
        f1[name] = _ratio(2 * tp, n_pred + n_gold)
        support[name] = n_gold
        if n_pred + n_gold == 0:
            degenerate.append(name)
    return MetricsReport(
        buggy_f1=f1["buggy"],
        macro_f1=(f1["clean"] + f1["buggy"]) / 2,
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        degenerate=degenerate,
    )


@dataclass
class AggregateReport:
    n_runs: int
    buggy_f1: float
    macro_f1: float
    buggy_f1_std: float
    macro_f1_std: float
    per_run: list[dict]

    def to_dict(self) -> dict:
        return asdict(self)


def aggregate(reports: Sequence[MetricsReport]) -> AggregateReport:
    """Arithmetic mean (and population std) of each headline metric over runs."""
    if not reports:
        raise ValueError("nothing to aggregate")
    b = np.array([r.buggy_f1 for r in reports])
    m = np.array([r.macro_f1 for r in reports])
    return AggregateReport(
        n_runs=len(reports),
        buggy_f1=float(b.mean()),
        macro_f1=float(m.mean()),
        buggy_f1_std=float(b.std()),
        macro_f1_std=float(m.std()),
        per_run=[r.to_dict() for r in reports],
    )
