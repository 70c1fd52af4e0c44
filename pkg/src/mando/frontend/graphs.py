"""Lowering of parsed functions into control-flow graphs and call graphs."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from mando.frontend.ast import AstContract, AstFunction, AstStmt, StmtKind
from mando.frontend.parser import parse_source
from mando.hetgraph import (
    ENTRY_POINT,
    EXTERNAL_CALL,
    FALLBACK_NODE,
    FUNCTION_NAME,
    INTERNAL_CALL,
    ContractGraphBundle,
    GraphKind,
    HetGraph,
    SourceSpan,
)

NEXT, TRUE, FALSE = "NEXT", "TRUE", "FALSE"

_SIMPLE_TYPES = {
    StmtKind.EXPRESSION: "EXPRESSION",
    StmtKind.NEW_VARIABLE: "NEW_VARIABLE",
    StmtKind.RETURN: "RETURN",
    StmtKind.THROW: "THROW",
    StmtKind.BREAK: "EXPRESSION",
    StmtKind.CONTINUE: "EXPRESSION",
}

Pred = tuple[int, str]


@dataclass
class _Loop:
    breaks: list[Pred] = field(default_factory=list)
    continues: list[Pred] = field(default_factory=list)


class _CfgBuilder:
    def __init__(self, fn: AstFunction):
        self.fn = fn
        self.g = HetGraph(GraphKind.HCFG)
        self.last: Optional[int] = None
        self.loops: list[_Loop] = []

    def node(self, node_type: str, span: SourceSpan, preds: list[Pred]) -> int:
        n = self.g.add_node(node_type, span, self.fn.qualified_name)
        if not preds and self.last is not None:
            # unreachable code: keep it attached in source order
            preds = [(self.last, NEXT)]
        self.link(preds, n)
        self.last = n
        return n

    def link(self, preds: Iterable[Pred], dst: int):
        for src, etype in preds:
            if not self.g.has_edge(src, dst, etype):
                self.g.add_edge(src, dst, etype)

    def build(self) -> HetGraph:
        entry = self.node(ENTRY_POINT, self.fn.header, [])
        self.seq(self.fn.body, [(entry, NEXT)])
        return self.g

    def seq(self, stmts: list[AstStmt], preds: list[Pred]) -> list[Pred]:
        for s in stmts:
            preds = self.stmt(s, preds)
        return preds

    def stmt(self, s: AstStmt, preds: list[Pred]) -> list[Pred]:
        k = s.kind
        if k is StmtKind.BLOCK:
            return self.seq(s.body, preds)
        if k in _SIMPLE_TYPES:
            n = self.node(_SIMPLE_TYPES[k], s.span, preds)
            if k is StmtKind.BREAK and self.loops:
                self.loops[-1].breaks.append((n, NEXT))
                return []
            if k is StmtKind.CONTINUE and self.loops:
                self.loops[-1].continues.append((n, NEXT))
                return []
            return [] if s.terminal else [(n, NEXT)]
        end_span = SourceSpan(s.span.file, max(s.end_line, s.span.line_start), max(s.end_line, s.span.line_start))
        if k is StmtKind.IF:
            n = self.node("IF", s.span, preds)
            then_exits = self.seq(s.then_branch.body if s.then_branch else [], [(n, TRUE)])
            else_exits = self.seq(s.else_branch.body, [(n, FALSE)]) if s.else_branch else [(n, FALSE)]
            end = self.node("END_IF", end_span, then_exits + else_exits)
            return [(end, NEXT)]
        if k in (StmtKind.WHILE, StmtKind.FOR):
            if s.init is not None:
                preds = self.stmt(s.init, preds)
            n = self.node("IF_LOOP", s.span, preds)
            loop = _Loop()
            self.loops.append(loop)
            exits = self.seq(s.body, [(n, TRUE)])
            self.loops.pop()
            back = exits + loop.continues
            if s.step is not None:
                step = self.node("EXPRESSION", s.step.span, back)
                back = [(step, NEXT)]
            self.link(back, n)
            end = self.node("END_LOOP", end_span, [(n, FALSE)] + loop.breaks)
            return [(end, NEXT)]
        if k is StmtKind.DO_WHILE:
            first = len(self.g.nodes)
            loop = _Loop()
            self.loops.append(loop)
            exits = self.seq(s.body, preds)
            self.loops.pop()
            body_made = len(self.g.nodes) > first
            n = self.node("IF_LOOP", s.span, exits + loop.continues if body_made else preds)
            self.link([(n, TRUE)], first if body_made else n)
            end = self.node("END_LOOP", end_span, [(n, FALSE)] + loop.breaks)
            return [(end, NEXT)]
        raise AssertionError(f"unhandled statement kind {k}")


def build_hcfg(fn: AstFunction) -> HetGraph:
    """Control-flow graph of one function; node 0 is its ENTRY_POINT."""
    return _CfgBuilder(fn).build()


def build_hcg(contracts: list[AstContract]) -> HetGraph:
    """Call graph over every implemented function of a compilation unit."""
    g = HetGraph(GraphKind.HCG)
    node_of: dict[str, int] = {}
    by_name: dict[tuple[str, str], str] = {}
    global_name: dict[str, str] = {}
    bases: dict[str, list[str]] = {c.name: c.bases for c in contracts}
    for c in contracts:
        for fn in c.functions:
            ntype = FALLBACK_NODE if fn.is_fallback else FUNCTION_NAME
            node_of[fn.qualified_name] = g.add_node(ntype, None, fn.qualified_name, name=fn.qualified_name)
            by_name.setdefault((c.name, fn.name), fn.qualified_name)
            global_name.setdefault(fn.name, fn.qualified_name)

    def resolve(contract: str, name: str) -> Optional[str]:
        seen, todo = set(), [contract]
        while todo:
            cur = todo.pop(0)
            if cur in seen:
                continue
            seen.add(cur)
            if (cur, name) in by_name:
                return by_name[(cur, name)]
            todo.extend(bases.get(cur, []))
        return global_name.get(name)

    external: dict[str, int] = {}
    for c in contracts:
        for fn in c.functions:
            src = node_of[fn.qualified_name]
            for stmt in fn.statements():
                for ref in stmt.calls:
                    if ref.external:
                        if ref.name not in external:
                            external[ref.name] = g.add_node(FUNCTION_NAME, None, None, name=ref.name, external=True)
                        dst, etype = external[ref.name], EXTERNAL_CALL
                    else:
                        target = resolve(c.name, ref.name)
                        if target is None:
                            continue
                        dst, etype = node_of[target], INTERNAL_CALL
                    if not g.has_edge(src, dst, etype):
                        g.add_edge(src, dst, etype)
    return g


def bundle_from_contracts(contracts: list[AstContract], name: str) -> ContractGraphBundle:
    hcg = build_hcg(contracts)
    hcfgs, entry_of = {}, {}
    for c in contracts:
        for fn in c.functions:
            hcfgs[fn.qualified_name] = build_hcfg(fn)
            entry_of[fn.qualified_name] = 0
    return ContractGraphBundle(name, hcg, hcfgs, entry_of)


def bundle_from_source(source: str, file: str = "<input>", name: Optional[str] = None) -> ContractGraphBundle:
    """Parse Solidity text and build its call graph and control-flow graphs."""
    contracts = parse_source(source, file)
    return bundle_from_contracts(contracts, name or Path(file).stem)
