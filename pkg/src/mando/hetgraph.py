"""Typed directed multigraphs and the call-graph / control-flow-graph fusion.

A :class:`HetGraph` holds nodes and edges that each carry an interned type
name.  Three kinds exist: per-function control-flow graphs (``HCFG``),
per-unit call graphs (``HCG``) and the fused contract graph (``FUSED``) that
attaches every control-flow graph to its function node in the call graph.
"""

from __future__ import annotations

import enum
import sys
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional

from mando.errors import DuplicateEdge, DuplicateNode, GraphError, MissingEntryPoint, UnknownEndpoint

CFG_OF = sys.intern("CFG_OF")
ENTRY_POINT = sys.intern("ENTRY_POINT")
FUNCTION_NAME = sys.intern("FUNCTION_NAME")
FALLBACK_NODE = sys.intern("FALLBACK_NODE")
INTERNAL_CALL = sys.intern("INTERNAL_CALL")
EXTERNAL_CALL = sys.intern("EXTERNAL_CALL")
# reserved relation for reflective metapaths; never a real edge type
BACK = sys.intern("back")


class GraphKind(str, enum.Enum):
    HCFG = "HCFG"
    HCG = "HCG"
    FUSED = "FUSED"


def type_name(name: str) -> str:
    """Intern a node or edge type name; equal names share one object."""
    if not isinstance(name, str) or not name:
        raise GraphError(f"type name must be a non-empty string, got {name!r}")
    return sys.intern(name)


@dataclass(frozen=True, order=True)
class SourceSpan:
    file: str
    line_start: int
    line_end: int

    def __post_init__(self):
        if self.line_start < 1 or self.line_end < self.line_start:
            raise GraphError(f"bad span {self.line_start}..{self.line_end}")

    def covers(self, line: int) -> bool:
        return self.line_start <= line <= self.line_end


@dataclass(frozen=True)
class HetNode:
    id: int
    node_type: str
    span: Optional[SourceSpan] = None
    owner: Optional[str] = None
    name: Optional[str] = None
    external: bool = False


@dataclass(frozen=True)
class HetEdge:
    src: int
    dst: int
    edge_type: str


class HetGraph:
    """Directed graph with typed nodes and typed edges.

    Node ids are dense and start at 0.  Parallel edges are allowed only when
    their edge types differ.
    """

    def __init__(self, kind: GraphKind | str):
        self.kind = GraphKind(kind)
        self.nodes: list[HetNode] = []
        self.edges: list[HetEdge] = []
        self.node_types: set[str] = set()
        self.edge_types: set[str] = set()
        self._edge_keys: set[tuple[int, int, str]] = set()
        self._out: Optional[list[list[int]]] = None

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return (
            f"HetGraph(kind={self.kind.value}, nodes={len(self.nodes)}, edges={len(self.edges)}, "
            f"|A|={len(self.node_types)}, |R|={len(self.edge_types)})"
        )

    def add_node(
        self,
        node_type: str,
        span: Optional[SourceSpan] = None,
        owner: Optional[str] = None,
        *,
        name: Optional[str] = None,
        external: bool = False,
        node_id: Optional[int] = None,
    ) -> int:
        new_id = len(self.nodes)
        if node_id is not None and node_id != new_id:
            if 0 <= node_id < new_id:
                raise DuplicateNode(f"node id {node_id} already exists")
            raise GraphError(f"node ids must be contiguous: expected {new_id}, got {node_id}")
        t = type_name(node_type)
        self.nodes.append(HetNode(new_id, t, span, owner, name, external))
        self.node_types.add(t)
        self._out = None
        return new_id

    def add_edge(self, src: int, dst: int, edge_type: str) -> int:
        n = len(self.nodes)
        for end in (src, dst):
            if not (isinstance(end, int) and 0 <= end < n):
                raise UnknownEndpoint(f"node {end} does not exist")
        t = type_name(edge_type)
        if t == BACK:
            raise GraphError(f"edge type {BACK!r} is reserved")
        key = (src, dst, t)
        if key in self._edge_keys:
            raise DuplicateEdge(f"edge {src}->{dst} of type {t} already exists")
        self._edge_keys.add(key)
        self.edges.append(HetEdge(src, dst, t))
        self.edge_types.add(t)
        self._out = None
        return len(self.edges) - 1

    def has_edge(self, src: int, dst: int, edge_type: str) -> bool:
        return (src, dst, edge_type) in self._edge_keys

    def out_edges(self, node: int) -> list[HetEdge]:
        if self._out is None:
            out: list[list[int]] = [[] for _ in self.nodes]
            for k, e in enumerate(self.edges):
                out[e.src].append(k)
            self._out = out
        return [self.edges[k] for k in self._out[node]]

    def in_edges(self, node: int) -> list[HetEdge]:
        return [e for e in self.edges if e.dst == node]

    def nodes_of_type(self, node_type: str) -> list[int]:
        return [n.id for n in self.nodes if n.node_type == node_type]


def new_graph(kind: GraphKind | str) -> HetGraph:
    return HetGraph(kind)


def add_node(g: HetGraph, node_type: str, span: Optional[SourceSpan] = None, owner: Optional[str] = None, **kw) -> int:
    return g.add_node(node_type, span, owner, **kw)


def add_edge(g: HetGraph, src: int, dst: int, edge_type: str) -> int:
    return g.add_edge(src, dst, edge_type)


def type_partition(g: HetGraph) -> dict[str, list[int]]:
    """Group node ids by node type, in ascending id order."""
    parts: dict[str, list[int]] = defaultdict(list)
    for node in g.nodes:
        parts[node.node_type].append(node.id)
    return dict(parts)


@dataclass
class ContractGraphBundle:
    """A unit's call graph plus one control-flow graph per implemented function."""

    contract: str
    hcg: HetGraph
    hcfgs: dict[str, HetGraph] = field(default_factory=dict)
    entry_of: dict[str, int] = field(default_factory=dict)

    def function_nodes(self) -> dict[str, int]:
        """Map qualified function name to its call-graph node id (internal functions only)."""
        return {n.name: n.id for n in self.hcg.nodes if n.name is not None and not n.external}


@dataclass
class FusionResult:
    graph: HetGraph
    # ("hcg", old id) or (function name, old id) -> fused id
    reindex: dict[tuple[str, int], int]


def _check_entry(name: str, cfg: HetGraph, entry: Optional[int]) -> int:
    entries = cfg.nodes_of_type(ENTRY_POINT)
    if entry is None:
        if len(entries) != 1:
            raise MissingEntryPoint(f"{name}: expected one ENTRY_POINT node, found {len(entries)}")
        return entries[0]
    if not (0 <= entry < len(cfg.nodes)) or cfg.nodes[entry].node_type != ENTRY_POINT:
        raise MissingEntryPoint(f"{name}: entry {entry} is not an ENTRY_POINT node")
    return entry


def fuse(bundle: ContractGraphBundle) -> FusionResult:
    """Union the call graph with every control-flow graph and link them.

    Call-graph nodes keep ids ``0..|V_C|-1``; control-flow graphs follow in
    sorted function-name order.  Each internal function node gains one
    ``CFG_OF`` edge to the entry node of its control-flow graph.
    """
    fused = HetGraph(GraphKind.FUSED)
    reindex: dict[tuple[str, int], int] = {}
    for node in bundle.hcg.nodes:
        new = fused.add_node(node.node_type, node.span, node.owner, name=node.name, external=node.external)
        reindex[("hcg", node.id)] = new
    for e in bundle.hcg.edges:
        fused.add_edge(reindex[("hcg", e.src)], reindex[("hcg", e.dst)], e.edge_type)

    fn_nodes = bundle.function_nodes()
    for fname in sorted(bundle.hcfgs):
        cfg = bundle.hcfgs[fname]
        entry = _check_entry(fname, cfg, bundle.entry_of.get(fname))
        for node in cfg.nodes:
            new = fused.add_node(node.node_type, node.span, node.owner or fname, name=node.name)
            reindex[(fname, node.id)] = new
        for e in cfg.edges:
            fused.add_edge(reindex[(fname, e.src)], reindex[(fname, e.dst)], e.edge_type)
        if fname in fn_nodes:
            fused.add_edge(reindex[("hcg", fn_nodes[fname])], reindex[(fname, entry)], CFG_OF)
    return FusionResult(fused, reindex)


# -- canonical dict form -----------------------------------------------------


def _span_dict(span: Optional[SourceSpan]) -> dict:
    if span is None:
        return {"file": None, "line_start": None, "line_end": None}
    return {"file": span.file, "line_start": span.line_start, "line_end": span.line_end}


def graph_to_dict(g: HetGraph) -> dict:
    nodes = []
    for n in g.nodes:
        d = {"id": n.id, "type": n.node_type, **_span_dict(n.span)}
        if n.owner is not None:
            d["owner"] = n.owner
        if n.name is not None:
            d["name"] = n.name
        if n.external:
            d["external"] = True
        nodes.append(d)
    edges = [{"src": e.src, "dst": e.dst, "type": e.edge_type} for e in g.edges]
    return {"version": "1", "kind": g.kind.value, "nodes": nodes, "edges": edges}


def graph_from_dict(data: dict) -> HetGraph:
    from mando.frontend.interchange import read_edges, read_node_span, require

    if str(require(data, "version", "graph")) != "1":
        from mando.errors import SchemaError

        raise SchemaError("version", f"unsupported version {data['version']!r}")
    g = HetGraph(require(data, "kind", "graph"))
    for k, nd in enumerate(require(data, "nodes", "graph")):
        where = f"nodes[{k}]"
        g.add_node(
            require(nd, "type", where),
            read_node_span(nd, where),
            nd.get("owner"),
            name=nd.get("name"),
            external=bool(nd.get("external", False)),
            node_id=require(nd, "id", where),
        )
    read_edges(g, require(data, "edges", "graph"), "edges")
    return g


def relabel(g: HetGraph, perm: Iterable[int]) -> HetGraph:
    """Return a copy whose node ``i`` becomes node ``perm[i]``."""
    perm = list(perm)
    inv = [0] * len(perm)
    for old, new in enumerate(perm):
        inv[new] = old
    out = HetGraph(g.kind)
    for new in range(len(perm)):
        n = g.nodes[inv[new]]
        out.add_node(n.node_type, n.span, n.owner, name=n.name, external=n.external)
    for e in g.edges:
        out.add_edge(perm[e.src], perm[e.dst], e.edge_type)
    return out
