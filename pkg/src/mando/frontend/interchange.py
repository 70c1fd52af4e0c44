"""JSON graph-interchange format (version "1").

Layout::

    {"version": "1", "contract": "...",
     "hcg": {"nodes": [{"id", "type", "name"?, "external"?}], "edges": [{"src", "dst", "type"}]},
     "hcfgs": {"<fn>": {"entry": 0,
                        "nodes": [{"id", "type", "file", "line_start", "line_end"}],
                        "edges": [...]}}}

Serialization is canonical: sorted keys, one-space indent, trailing newline.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional

from mando.errors import GraphError, SchemaError
from mando.hetgraph import ContractGraphBundle, GraphKind, HetGraph, SourceSpan

VERSION = "1"


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def require(obj: Any, key: str, where: str) -> Any:
    if not isinstance(obj, dict):
        raise SchemaError(where, "expected an object")
    if key not in obj:
        raise SchemaError(f"{where}.{key}", "missing")
    return obj[key]


def _int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(where, f"expected integer, got {value!r}")
    return value


def read_node_span(nd: dict, where: str) -> Optional[SourceSpan]:
    file, a, b = nd.get("file"), nd.get("line_start"), nd.get("line_end")
    if a is None and b is None:
        return None
    try:
        return SourceSpan(str(file or ""), _int(a, f"{where}.line_start"), _int(b, f"{where}.line_end"))
    except GraphError as exc:
        raise SchemaError(f"{where}.line_start", str(exc)) from None


def read_edges(g: HetGraph, edges: Any, where: str):
    if not isinstance(edges, list):
        raise SchemaError(where, "expected a list")
    for k, ed in enumerate(edges):
        w = f"{where}[{k}]"
        src = _int(require(ed, "src", w), f"{w}.src")
        dst = _int(require(ed, "dst", w), f"{w}.dst")
        etype = require(ed, "type", w)
        try:
            g.add_edge(src, dst, etype)
        except GraphError as exc:
            raise SchemaError(w, str(exc)) from None


def _read_nodes(g: HetGraph, nodes: Any, where: str, with_span: bool, owner: Optional[str] = None):
    if not isinstance(nodes, list):
        raise SchemaError(where, "expected a list")
    for k, nd in enumerate(nodes):
        w = f"{where}[{k}]"
        node_id = _int(require(nd, "id", w), f"{w}.id")
        ntype = require(nd, "type", w)
        span = read_node_span(nd, w) if with_span else None
        name = nd.get("name")
        external = bool(nd.get("external", False))
        node_owner = owner if with_span else (None if external else name)
        try:
            g.add_node(ntype, span, node_owner, name=name, external=external, node_id=node_id)
        except GraphError as exc:
            raise SchemaError(f"{w}.id", str(exc)) from None


def bundle_to_dict(bundle: ContractGraphBundle) -> dict:
    hcg_nodes = []
    for n in bundle.hcg.nodes:
        d: dict[str, Any] = {"id": n.id, "type": n.node_type}
        if n.name is not None:
            d["name"] = n.name
        if n.external:
            d["external"] = True
        hcg_nodes.append(d)
    hcfgs = {}
    for fname, g in bundle.hcfgs.items():
        nodes = []
        for n in g.nodes:
            s = n.span
            nodes.append(
                {
                    "id": n.id,
                    "type": n.node_type,
                    "file": s.file if s else None,
                    "line_start": s.line_start if s else None,
                    "line_end": s.line_end if s else None,
                }
            )
        hcfgs[fname] = {
            "entry": bundle.entry_of.get(fname, 0),
            "nodes": nodes,
            "edges": [{"src": e.src, "dst": e.dst, "type": e.edge_type} for e in g.edges],
        }
    return {
        "version": VERSION,
        "contract": bundle.contract,
        "hcg": {
            "nodes": hcg_nodes,
            "edges": [{"src": e.src, "dst": e.dst, "type": e.edge_type} for e in bundle.hcg.edges],
        },
        "hcfgs": hcfgs,
    }


def bundle_from_dict(data: Any) -> ContractGraphBundle:
    version = require(data, "version", "$")
    if str(version) != VERSION:
        raise SchemaError("version", f"unsupported version {version!r}")
    contract = require(data, "contract", "$")
    hcg_data = require(data, "hcg", "$")
    hcg = HetGraph(GraphKind.HCG)
    _read_nodes(hcg, require(hcg_data, "nodes", "hcg"), "hcg.nodes", with_span=False)
    read_edges(hcg, require(hcg_data, "edges", "hcg"), "hcg.edges")
    hcfgs_data = require(data, "hcfgs", "$")
    if not isinstance(hcfgs_data, dict):
        raise SchemaError("hcfgs", "expected an object")
    hcfgs, entry_of = {}, {}
    for fname, gd in hcfgs_data.items():
        where = f"hcfgs.{fname}"
        g = HetGraph(GraphKind.HCFG)
        _read_nodes(g, require(gd, "nodes", where), f"{where}.nodes", with_span=True, owner=fname)
        read_edges(g, require(gd, "edges", where), f"{where}.edges")
        entry = _int(require(gd, "entry", where), f"{where}.entry")
        if not (0 <= entry < len(g.nodes)):
            raise SchemaError(f"{where}.entry", f"no node {entry}")
        hcfgs[fname] = g
        entry_of[fname] = entry
    return ContractGraphBundle(str(contract), hcg, hcfgs, entry_of)


def export_json(bundle: ContractGraphBundle, path: str | Path):
    Path(path).write_text(canonical_json(bundle_to_dict(bundle)), encoding="utf-8")


def import_json(path: str | Path) -> ContractGraphBundle:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    return bundle_from_dict(data)
