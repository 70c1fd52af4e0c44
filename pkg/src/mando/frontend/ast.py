"""Syntax tree for the supported Solidity subset."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from mando.hetgraph import SourceSpan


class StmtKind(str, enum.Enum):
    EXPRESSION = "Expression"
    NEW_VARIABLE = "NewVariable"
    RETURN = "Return"
    IF = "If"
    WHILE = "While"
    DO_WHILE = "DoWhile"
    FOR = "For"
    THROW = "Throw"
    BLOCK = "Block"
    BREAK = "Break"
    CONTINUE = "Continue"


@dataclass
class CallRef:
    """A call site found inside a statement.

    ``name`` is the bare callee for plain calls (``foo(...)``) and the
    receiver chain for member calls (``msg.sender.call``).
    """

    name: str
    member: bool
    method: str = ""
    root: str = ""
    external: bool = False


@dataclass
class AstStmt:
    kind: StmtKind
    span: SourceSpan
    calls: list[CallRef] = field(default_factory=list)
    # If: then_branch / else_branch; loops: body
    then_branch: Optional["AstStmt"] = None
    else_branch: Optional["AstStmt"] = None
    body: list["AstStmt"] = field(default_factory=list)
    # For loops
    init: Optional["AstStmt"] = None
    step: Optional["AstStmt"] = None
    # last line of the whole compound statement (END_IF / END_LOOP position)
    end_line: int = 0
    # throw / revert end the function; require / assert do not
    terminal: bool = False
    opaque: bool = False
    declared: list[tuple[str, str]] = field(default_factory=list)

    def walk(self):
        yield self
        for child in (self.init, self.then_branch, self.else_branch, self.step):
            if child is not None:
                yield from child.walk()
        for child in self.body:
            yield from child.walk()


@dataclass
class AstFunction:
    qualified_name: str
    name: str
    contract: str
    params: list[tuple[str, str]]
    body: list[AstStmt]
    header: SourceSpan
    end_line: int
    is_fallback: bool = False
    is_payable: bool = False
    visibility: str = "public"
    modifiers: list[str] = field(default_factory=list)

    def statements(self):
        for stmt in self.body:
            yield from stmt.walk()


@dataclass
class AstContract:
    name: str
    kind: str
    bases: list[str] = field(default_factory=list)
    functions: list[AstFunction] = field(default_factory=list)
    state_vars: dict[str, str] = field(default_factory=dict)
