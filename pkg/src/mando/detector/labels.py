"""Mapping annotated source lines onto graph nodes."""

from __future__ import annotations

from pathlib import PurePath
from typing import Iterable

import numpy as np

from mando.hetgraph import HetGraph


def _base(file: str) -> str:
    return PurePath(file).name


def map_line_labels(g: HetGraph, buggy_lines: Iterable[tuple[str, int]]) -> tuple[np.ndarray, list[tuple[str, int]]]:
    """Return (per-node buggy flags, annotated lines no node covers).

    Files are compared by base name.  A node with a source span is buggy when
    the span contains an annotated line of its file; a function node without
    a span is buggy when any node it owns is buggy; external callee nodes
    stay clean.
    """
    by_file: dict[str, set[int]] = {}
    for file, line in buggy_lines:
        by_file.setdefault(_base(file), set()).add(int(line))
    labels = np.zeros(len(g.nodes), dtype=bool)
    hit: set[tuple[str, int]] = set()
    for n in g.nodes:
        if n.span is None:
            continue
        lines = by_file.get(_base(n.span.file))
        if not lines:
            continue
        covered = [ln for ln in lines if n.span.covers(ln)]
        if covered:
            labels[n.id] = True
            hit.update((_base(n.span.file), ln) for ln in covered)
    buggy_owners = {n.owner for n in g.nodes if labels[n.id] and n.owner is not None}
    for n in g.nodes:
        if n.span is None and not n.external and n.name is not None and n.name in buggy_owners:
            labels[n.id] = True
    unmapped = sorted((f, ln) for f, lines in by_file.items() for ln in lines if (f, ln) not in hit)
    return labels, unmapped
