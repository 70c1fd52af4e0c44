"""Packing fused graphs, features and metapath neighbours into flat index tensors.

A model fixes an ordered node-type vocabulary and an ordered metapath list.
Graph nodes whose type is outside the vocabulary, and catalog paths outside
the list, are ignored when packing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch

from mando.errors import MandoError
from mando.hetgraph import HetGraph
from mando.metapath import Metapath, MetapathCatalog, extract_catalog


@dataclass
class GraphInput:
    graph: HetGraph
    features: np.ndarray
    catalog: Optional[MetapathCatalog] = None

    def resolved_catalog(self) -> MetapathCatalog:
        if self.catalog is None:
            self.catalog = extract_catalog(self.graph)
        return self.catalog


@dataclass
class PathEdges:
    """Attention edges of one metapath: centre and neighbour node indices.

    ``nodes`` lists every node the path touches; ``c_loc``/``n_loc`` index
    into it, ``seg`` numbers each edge's centre among ``nodes[center_pos]``.
    """

    centers: torch.Tensor
    nbrs: torch.Tensor

    def __post_init__(self):
        self.nodes, inv = torch.unique(torch.cat([self.centers, self.nbrs]), return_inverse=True)
        self.c_loc, self.n_loc = inv[: len(self.centers)], inv[len(self.centers) :]
        self.center_pos, self.seg = torch.unique(self.c_loc, return_inverse=True)


@dataclass
class GraphBatch:
    x: torch.Tensor  # (N, in_dim) input features
    node_type: torch.Tensor  # (N,) vocabulary index, -1 when unknown
    graph_index: torch.Tensor  # (N,) owning graph
    n_graphs: int
    path_edges: dict[int, PathEdges]  # model path index -> edges
    paths_per_type: torch.Tensor  # (T,) model paths starting at each type
    graph_sizes: torch.Tensor  # (G,) node count per graph

    @property
    def n_nodes(self) -> int:
        return self.x.shape[0]

    def to(self, dtype: torch.dtype) -> "GraphBatch":
        self.x = self.x.to(dtype)
        return self


def vocabulary_of(inputs: Sequence[GraphInput]) -> list[str]:
    return sorted({t for gi in inputs for t in gi.graph.node_types})


def paths_of(inputs: Sequence[GraphInput]) -> list[Metapath]:
    return sorted({p for gi in inputs for p in gi.resolved_catalog().paths})


def encode_batch(
    inputs: Sequence[GraphInput],
    vocab: Sequence[str],
    paths: Sequence[Metapath],
    dtype: torch.dtype = torch.float32,
) -> GraphBatch:
    type_index = {t: k for k, t in enumerate(vocab)}
    path_index = {tuple(p): k for k, p in enumerate(paths)}
    feats, types, owner, sizes = [], [], [], []
    edges: dict[int, tuple[list[np.ndarray], list[np.ndarray]]] = {}
    offset = 0
    in_dim = None
    for g_idx, gi in enumerate(inputs):
        g = gi.graph
        n = len(g.nodes)
        if gi.features.shape[0] != n:
            raise MandoError(f"graph {g_idx}: {gi.features.shape[0]} feature rows for {n} nodes")
        if in_dim is None:
            in_dim = gi.features.shape[1]
        elif gi.features.shape[1] != in_dim:
            raise MandoError(f"graph {g_idx}: feature width {gi.features.shape[1]} != {in_dim}")
        feats.append(np.asarray(gi.features, dtype=np.float64))
        types.append(np.array([type_index.get(nd.node_type, -1) for nd in g.nodes], dtype=np.int64))
        owner.append(np.full(n, g_idx, dtype=np.int64))
        sizes.append(n)
        cat = gi.resolved_catalog()
        for p in cat.paths:
            k = path_index.get(tuple(p))
            if k is None:
                continue
            cs, ns = edges.setdefault(k, ([], []))
            for c, nbrs in cat.per_path_neighbors[p].items():
                cs.append(np.full(len(nbrs), c + offset, dtype=np.int64))
                ns.append(np.asarray(nbrs, dtype=np.int64) + offset)
        offset += n
    per_type = np.zeros(len(vocab), dtype=np.int64)
    for p in paths:
        if p[0] in type_index:
            per_type[type_index[p[0]]] += 1
    path_edges = {}
    for k in sorted(edges):
        cs, ns = edges[k]
        if cs:
            path_edges[k] = PathEdges(torch.from_numpy(np.concatenate(cs)), torch.from_numpy(np.concatenate(ns)))
    x = np.concatenate(feats) if feats else np.zeros((0, in_dim or 0))
    return GraphBatch(
        x=torch.from_numpy(x).to(dtype),
        node_type=torch.from_numpy(np.concatenate(types) if types else np.zeros(0, np.int64)),
        graph_index=torch.from_numpy(np.concatenate(owner) if owner else np.zeros(0, np.int64)),
        n_graphs=len(inputs),
        path_edges=path_edges,
        paths_per_type=torch.from_numpy(per_type),
        graph_sizes=torch.tensor(sizes, dtype=torch.int64),
    )
