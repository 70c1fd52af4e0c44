"""Length-2 metapath discovery.

Every pair of consecutive typed edges ``u -r1-> v -r2-> w`` yields the
metapath ``(type(u), r1, type(v), r2, type(w))``, and every single edge
``u -r1-> v`` yields the reflective form ``(type(u), r1, type(v), back,
type(u))``.  For a metapath centred on a node ``i`` of its first type, the
attended neighbours are the intermediate nodes: type-``a2`` nodes one ``r1``
hop from ``i`` that have an ``r2`` continuation to a type-``a3`` node.
"""

from __future__ import annotations

import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple

from mando.errors import UnknownMetapath
from mando.hetgraph import BACK, HetGraph


class Metapath(NamedTuple):
    a1: str
    r1: str
    a2: str
    r2: str
    a3: str

    @property
    def is_back(self) -> bool:
        return self.r2 == BACK

    def key(self) -> str:
        return "|".join(self)


@dataclass
class MetapathCatalog:
    paths: list[Metapath] = field(default_factory=list)
    per_path_neighbors: dict[Metapath, dict[int, list[int]]] = field(default_factory=dict)
    per_type_paths: dict[str, list[Metapath]] = field(default_factory=dict)

    def __contains__(self, path) -> bool:
        return tuple(path) in self.per_path_neighbors

    def __len__(self) -> int:
        return len(self.paths)

    def digest(self) -> str:
        return paths_digest(self.paths)


def paths_digest(paths) -> str:
    blob = json.dumps([list(p) for p in paths], separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def extract_catalog(g: HetGraph) -> MetapathCatalog:
    """Discover all length-2 metapaths of ``g`` and index their neighbours."""
    ntype = [n.node_type for n in g.nodes]
    continuations: list[set[tuple[str, str]]] = [set() for _ in g.nodes]
    for e in g.edges:
        continuations[e.src].add((e.edge_type, ntype[e.dst]))

    found: dict[Metapath, dict[int, set[int]]] = defaultdict(lambda: defaultdict(set))
    for e in g.edges:
        a1, a2 = ntype[e.src], ntype[e.dst]
        found[Metapath(a1, e.edge_type, a2, BACK, a1)][e.src].add(e.dst)
        for r2, a3 in continuations[e.dst]:
            found[Metapath(a1, e.edge_type, a2, r2, a3)][e.src].add(e.dst)

    paths = sorted(found)
    neighbors = {p: {c: sorted(ns) for c, ns in sorted(found[p].items())} for p in paths}
    per_type: dict[str, list[Metapath]] = defaultdict(list)
    for p in paths:
        per_type[p.a1].append(p)
    return MetapathCatalog(paths, neighbors, dict(per_type))


def neighbors(catalog: MetapathCatalog, path, node: int) -> list[int]:
    path = Metapath(*path)
    if path not in catalog.per_path_neighbors:
        raise UnknownMetapath(f"metapath {path.key()} is not in the catalog")
    return list(catalog.per_path_neighbors[path].get(node, ()))


def catalog_to_dict(catalog: MetapathCatalog) -> dict:
    return {
        "version": "1",
        "digest": catalog.digest(),
        "paths": [
            {
                "path": list(p),
                "neighbors": [[c, ns] for c, ns in catalog.per_path_neighbors[p].items()],
            }
            for p in catalog.paths
        ],
    }


def catalog_from_dict(data: dict) -> MetapathCatalog:
    paths, neighbors_ = [], {}
    for item in data["paths"]:
        p = Metapath(*item["path"])
        paths.append(p)
        neighbors_[p] = {int(c): list(ns) for c, ns in item["neighbors"]}
    per_type: dict[str, list[Metapath]] = defaultdict(list)
    for p in paths:
        per_type[p.a1].append(p)
    return MetapathCatalog(paths, neighbors_, dict(per_type))
