"""Graph-level stratified train/test splits that also keep the node-level bug ratio."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

import numpy as np

from mando.errors import StratumTooSmall


@dataclass
class Split:
    train: list[int]
    test: list[int]
    draw: int
    ratio_gap: float  # largest |side ratio - global ratio| of buggy nodes


def _draw(strata: Sequence[Hashable], train_frac: float, rng: np.random.Generator) -> tuple[list[int], list[int]]:
    groups: dict[Hashable, list[int]] = {}
    for i, s in enumerate(strata):
        groups.setdefault(s, []).append(i)
    train, test = [], []
    for key in sorted(groups, key=repr):
        members = groups[key]
        order = rng.permutation(len(members))
        k = math.floor(train_frac * len(members) + 0.5)
        train.extend(members[j] for j in order[:k])
        test.extend(members[j] for j in order[k:])
    return sorted(train), sorted(test)


def _gap(idx: list[int], counts: np.ndarray, global_ratio: float) -> float:
    total = counts[idx, 0].sum()
    if total == 0:
        return 0.0
    return abs(counts[idx, 1].sum() / total - global_ratio)


def split(
    strata: Sequence[Hashable],
    seed: int,
    train_frac: float = 0.7,
    node_counts: Optional[Sequence[tuple[int, int]]] = None,
    tolerance: float = 0.05,
    max_draws: int = 100,
) -> Split:
    """Split item indices by stratum; ``node_counts[i]`` is (nodes, buggy nodes) of item ``i``.

    Draws are repeated (up to ``max_draws``) until the buggy-node ratio of
    both sides is within ``tolerance`` of the global ratio; failing that, the
    draw with the smallest gap is returned.
    """
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must lie in (0, 1)")
    sizes: dict[Hashable, int] = {}
    for s in strata:
        sizes[s] = sizes.get(s, 0) + 1
    small = sorted((repr(s) for s, n in sizes.items() if n < 2))
    if small:
        raise StratumTooSmall(f"strata with fewer than 2 entries: {', '.join(small)}")
    counts = np.asarray(node_counts, dtype=np.int64).reshape(-1, 2) if node_counts is not None else None
    best: Optional[Split] = None
    for draw in range(max_draws if counts is not None else 1):
        train, test = _draw(strata, train_frac, np.random.default_rng([seed, draw]))
        gap = 0.0
        if counts is not None:
            total = counts[:, 0].sum()
            ratio = counts[:, 1].sum() / total if total else 0.0
            gap = max(_gap(train, counts, ratio), _gap(test, counts, ratio))
        cand = Split(train, test, draw, float(gap))
        if best is None or cand.ratio_gap < best.ratio_gap:
            best = cand
        if gap <= tolerance:
            break
    return best
