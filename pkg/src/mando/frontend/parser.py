"""Recursive-descent parser for the supported Solidity subset.

Only the statement structure of function bodies is parsed precisely.
Expressions are consumed as balanced token runs and scanned for call sites.
Constructs outside the subset (inline assembly, try/catch, free functions)
become opaque expression statements instead of failing the parse.
"""

from __future__ import annotations

import re
from typing import Optional

from mando.errors import ParseError
from mando.frontend.ast import AstContract, AstFunction, AstStmt, CallRef, StmtKind
from mando.frontend.lexer import Token, TokenKind, tokenize
from mando.hetgraph import SourceSpan

ELEMENTARY_TYPE = re.compile(r"^(u?int\d*|bytes\d*|bool|address|string|byte|var|u?fixed[\dx]*)$")
LOW_LEVEL_CALLS = frozenset({"call", "send", "transfer", "delegatecall", "staticcall", "callcode"})
BUILTIN_FUNCTIONS = frozenset(
    {
        "require", "assert", "revert", "keccak256", "sha3", "sha256", "ripemd160", "ecrecover",
        "addmod", "mulmod", "blockhash", "selfdestruct", "suicide", "gasleft", "type", "payable",
    }
)  # fmt: skip
BUILTIN_ROOTS = frozenset({"abi", "block", "tx", "string", "bytes", "type", "super"})
DATA_LOCATIONS = frozenset({"memory", "storage", "calldata"})
VISIBILITY = frozenset({"public", "private", "internal", "external"})
_OPEN = {"(": ")", "[": "]", "{": "}"}
_CLOSE = {")", "]", "}"}


class _Parser:
    def __init__(self, tokens: list[Token], file: str):
        self.toks = tokens
        self.pos = 0
        self.file = file
        self.structs: set[str] = set()
        self._check_balance()

    # -- token helpers -------------------------------------------------------

    def _check_balance(self):
        stack: list[Token] = []
        for t in self.toks:
            if t.kind is not TokenKind.PUNCT:
                continue
            if t.text in _OPEN:
                stack.append(t)
            elif t.text in _CLOSE:
                if not stack or _OPEN[stack[-1].text] != t.text:
                    expected = f"'{_OPEN[stack[-1].text]}'" if stack else "end of input"
                    raise ParseError(t.line, f"{expected} before '{t.text}'")
                stack.pop()
        if stack:
            raise ParseError(stack[-1].line, f"closing '{_OPEN[stack[-1].text]}'")

    @property
    def tok(self) -> Optional[Token]:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def peek(self, k: int = 0) -> Optional[Token]:
        i = self.pos + k
        return self.toks[i] if 0 <= i < len(self.toks) else None

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t is not None and t.text == text and t.kind is not TokenKind.STRING

    def line(self) -> int:
        t = self.tok or (self.toks[-1] if self.toks else None)
        return t.line if t else 1

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise ParseError(self.line(), f"'{text}'")
        t = self.tok
        self.pos += 1
        return t

    def skip_balanced(self) -> int:
        """Skip one bracketed group starting at the current token; return index of its closer."""
        depth = 0
        while self.pos < len(self.toks):
            t = self.toks[self.pos]
            if t.kind is TokenKind.PUNCT and t.text in _OPEN:
                depth += 1
            elif t.kind is TokenKind.PUNCT and t.text in _CLOSE:
                depth -= 1
                if depth == 0:
                    self.pos += 1
                    return self.pos - 1
            self.pos += 1
        raise ParseError(self.line(), "balanced brackets")

    def take_until_semicolon(self) -> tuple[int, int]:
        """Consume tokens up to and including the next top-level ';'. Return [start, end) excluding ';'."""
        start = self.pos
        while self.pos < len(self.toks):
            t = self.toks[self.pos]
            if t.kind is TokenKind.PUNCT and t.text in _OPEN:
                self.skip_balanced()
                continue
            if t.kind is TokenKind.PUNCT and t.text == "}":
                raise ParseError(t.line, "';'")
            if t.kind is TokenKind.PUNCT and t.text == ";":
                self.pos += 1
                return start, self.pos - 1
            self.pos += 1
        raise ParseError(self.line(), "';'")

    def span(self, start: int, end: int) -> SourceSpan:
        """Span from token ``start`` to token ``end`` (inclusive)."""
        end = max(start, min(end, len(self.toks) - 1))
        return SourceSpan(self.file, self.toks[start].line, self.toks[end].line)

    # -- top level -----------------------------------------------------------

    def parse_unit(self) -> list[AstContract]:
        contracts: list[AstContract] = []
        while self.tok is not None:
            t = self.tok
            if t.text in ("pragma", "import", "using") and t.kind is TokenKind.KEYWORD:
                self.take_until_semicolon()
            elif t.text == "abstract" and self.at("contract", 1):
                self.pos += 1
            elif t.text in ("contract", "interface", "library") and t.kind is TokenKind.KEYWORD:
                contracts.append(self.parse_contract())
            elif t.text in ("struct", "enum"):
                self.skip_struct()
            elif t.text == "function":
                # free function: outside the subset, skip it
                self.skip_function_like()
            elif t.text == ";":
                self.pos += 1
            else:
                self.skip_member()
        _dedupe_names(contracts)
        for c in contracts:
            _resolve_calls(c, contracts, self.structs)
        return contracts

    def parse_contract(self) -> AstContract:
        kind = self.tok.text
        self.pos += 1
        name_tok = self.tok
        if name_tok is None or name_tok.kind is not TokenKind.IDENT:
            raise ParseError(self.line(), "contract name")
        self.pos += 1
        contract = AstContract(name_tok.text, kind)
        if self.at("is"):
            self.pos += 1
            while self.tok is not None and not self.at("{"):
                if self.tok.kind is TokenKind.IDENT and not self.at(".", -1):
                    contract.bases.append(self.tok.text)
                if self.at("("):
                    self.skip_balanced()
                else:
                    self.pos += 1
        self.expect("{")
        while not self.at("}"):
            if self.tok is None:
                raise ParseError(self.line(), "'}'")
            self.parse_member(contract)
        self.pos += 1
        return contract

    def parse_member(self, contract: AstContract):
        t = self.tok
        if t.text in ("function", "constructor", "fallback", "receive") and t.kind is TokenKind.KEYWORD:
            fn = self.parse_function(contract)
            if fn is not None:
                contract.functions.append(fn)
        elif t.text == "modifier":
            self.skip_function_like()
        elif t.text in ("event", "error", "using"):
            self.take_until_semicolon()
        elif t.text in ("struct", "enum"):
            self.skip_struct()
        elif t.text == ";":
            self.pos += 1
        else:
            start, end = self.take_until_semicolon()
            name, typ = _declared_name(self.toks[start:end])
            if name:
                contract.state_vars[name] = typ

    def skip_struct(self):
        name = self.peek(1)
        if name is not None:
            self.structs.add(name.text)
        self.pos += 2
        self.skip_balanced()

    def skip_member(self):
        while self.tok is not None:
            if self.at(";"):
                self.pos += 1
                return
            if self.at("{"):
                self.skip_balanced()
                return
            if self.tok.text in _OPEN:
                self.skip_balanced()
            else:
                self.pos += 1

    def skip_function_like(self):
        while self.tok is not None:
            if self.at(";"):
                self.pos += 1
                return
            if self.at("{"):
                self.skip_balanced()
                return
            if self.at("("):
                self.skip_balanced()
            else:
                self.pos += 1

    def parse_function(self, contract: AstContract) -> Optional[AstFunction]:
        start = self.pos
        head = self.tok.text
        self.pos += 1
        is_fallback = head in ("fallback", "receive")
        if head == "function":
            if self.tok is not None and self.tok.kind in (TokenKind.IDENT, TokenKind.KEYWORD) and not self.at("("):
                name = self.tok.text
                self.pos += 1
            else:
                name, is_fallback = "fallback", True
        else:
            name = head
        if not self.at("("):
            raise ParseError(self.line(), "'(' after function name")
        p_open = self.pos
        p_close = self.skip_balanced()
        params = _split_params(self.toks[p_open + 1 : p_close])
        visibility, payable, modifiers = "public", False, []
        while self.tok is not None and not self.at("{") and not self.at(";"):
            t = self.tok
            if t.text in VISIBILITY:
                visibility = t.text
            elif t.text == "payable":
                payable = True
            elif t.text == "returns":
                self.pos += 1
                if self.at("("):
                    self.skip_balanced()
                continue
            elif t.kind is TokenKind.IDENT:
                modifiers.append(t.text)
            if self.at("("):
                self.skip_balanced()
            else:
                self.pos += 1
        if self.tok is None:
            raise ParseError(self.line(), "function body")
        if self.at(";"):
            self.pos += 1
            return None
        header = self.span(start, self.pos)
        self.pos += 1
        body = self.parse_block_items()
        end_line = self.toks[self.pos - 1].line
        return AstFunction(
            qualified_name=f"{contract.name}.{name}",
            name=name,
            contract=contract.name,
            params=params,
            body=body,
            header=header,
            end_line=end_line,
            is_fallback=is_fallback,
            is_payable=payable,
            visibility=visibility,
            modifiers=modifiers,
        )

    # -- statements ----------------------------------------------------------

    def parse_block_items(self) -> list[AstStmt]:
        """Parse statements until the closing '}' (consumed)."""
        items: list[AstStmt] = []
        while not self.at("}"):
            if self.tok is None:
                raise ParseError(self.line(), "'}'")
            stmt = self.parse_statement()
            if stmt is not None:
                items.append(stmt)
        self.pos += 1
        return items

    def parse_statement(self) -> Optional[AstStmt]:
        t = self.tok
        kw = t.text if t.kind is not TokenKind.STRING else ""
        start = self.pos
        if kw == "{" and t.kind is TokenKind.PUNCT:
            self.pos += 1
            body = self.parse_block_items()
            return AstStmt(StmtKind.BLOCK, self.span(start, self.pos - 1), body=body)
        if kw == "unchecked" and self.at("{", 1):
            self.pos += 1
            return self.parse_statement()
        if kw == ";":
            self.pos += 1
            return None
        if kw == "if" and t.kind is TokenKind.KEYWORD:
            return self.parse_if()
        if kw == "while" and t.kind is TokenKind.KEYWORD:
            self.pos += 1
            c0 = self.pos
            c1 = self.skip_balanced()
            stmt = AstStmt(StmtKind.WHILE, self.span(start, c1), calls=self.calls_in(c0, c1))
            stmt.body = self.branch_items()
            stmt.end_line = self.toks[self.pos - 1].line
            return stmt
        if kw == "for" and t.kind is TokenKind.KEYWORD:
            return self.parse_for()
        if kw == "do" and t.kind is TokenKind.KEYWORD:
            self.pos += 1
            body = self.branch_items()
            self.expect("while")
            c0 = self.pos
            c1 = self.skip_balanced()
            semi = self.expect(";")
            stmt = AstStmt(StmtKind.DO_WHILE, self.span(c0 - 1, c1), calls=self.calls_in(c0, c1), body=body)
            stmt.end_line = semi.line
            return stmt
        if kw in ("break", "continue") and t.kind is TokenKind.KEYWORD:
            self.pos += 1
            self.expect(";")
            kind = StmtKind.BREAK if kw == "break" else StmtKind.CONTINUE
            return AstStmt(kind, self.span(start, self.pos - 1))
        if kw == "return" and t.kind is TokenKind.KEYWORD:
            s, e = self.take_until_semicolon()
            return AstStmt(StmtKind.RETURN, self.span(s, e), calls=self.calls_in(s + 1, e), terminal=True)
        if kw == "throw" and t.kind is TokenKind.KEYWORD:
            s, e = self.take_until_semicolon()
            return AstStmt(StmtKind.THROW, self.span(s, e), terminal=True)
        if kw == "revert":
            s, e = self.take_until_semicolon()
            return AstStmt(StmtKind.THROW, self.span(s, e), calls=self.calls_in(s + 1, e), terminal=True)
        if kw in ("require", "assert") and self.at("(", 1):
            s, e = self.take_until_semicolon()
            return AstStmt(StmtKind.THROW, self.span(s, e), calls=self.calls_in(s + 1, e))
        if kw == "assembly" and t.kind is TokenKind.KEYWORD:
            self.pos += 1
            if self.tok is not None and self.tok.kind is TokenKind.STRING:
                self.pos += 1
            if self.at("("):
                self.skip_balanced()
            end = self.skip_balanced()
            return AstStmt(StmtKind.EXPRESSION, self.span(start, end), opaque=True)
        if kw == "try" and t.kind is TokenKind.KEYWORD:
            return self.parse_try()
        s, e = self.take_until_semicolon()
        if self._is_declaration(s, e):
            stmt = AstStmt(StmtKind.NEW_VARIABLE, self.span(s, e), calls=self.calls_in(s, e))
            name, typ = _declared_name(self.toks[s:e])
            stmt.declared = _tuple_declared(self.toks[s:e]) if self.toks[s].text == "(" else ([(name, typ)] if name else [])
            return stmt
        return AstStmt(StmtKind.EXPRESSION, self.span(s, e), calls=self.calls_in(s, e))

    def branch_items(self) -> list[AstStmt]:
        stmt = self.parse_statement()
        if stmt is None:
            return []
        return stmt.body if stmt.kind is StmtKind.BLOCK else [stmt]

    def parse_if(self) -> AstStmt:
        start = self.pos
        self.pos += 1
        c0 = self.pos
        c1 = self.skip_balanced()
        stmt = AstStmt(StmtKind.IF, self.span(start, c1), calls=self.calls_in(c0, c1))
        then_items = self.branch_items()
        stmt.then_branch = AstStmt(StmtKind.BLOCK, stmt.span, body=then_items)
        if self.at("else"):
            self.pos += 1
            else_items = self.branch_items()
            stmt.else_branch = AstStmt(StmtKind.BLOCK, stmt.span, body=else_items)
        stmt.end_line = self.toks[self.pos - 1].line
        return stmt

    def parse_for(self) -> AstStmt:
        start = self.pos
        self.pos += 1
        p_open = self.pos
        p_close = self.skip_balanced()
        parts = _split_top(self.toks, p_open + 1, p_close, ";")
        if len(parts) != 3:
            raise ParseError(self.toks[p_open].line, "'for (init; cond; step)'")
        (i0, i1), (c0, c1), (s0, s1) = parts
        stmt = AstStmt(StmtKind.FOR, self.span(start, p_close), calls=self.calls_in(c0, c1))
        if i1 > i0:
            kind = StmtKind.NEW_VARIABLE if self._is_declaration(i0, i1) else StmtKind.EXPRESSION
            stmt.init = AstStmt(kind, self.span(i0, i1 - 1), calls=self.calls_in(i0, i1))
            if kind is StmtKind.NEW_VARIABLE:
                name, typ = _declared_name(self.toks[i0:i1])
                stmt.init.declared = [(name, typ)] if name else []
        if s1 > s0:
            stmt.step = AstStmt(StmtKind.EXPRESSION, self.span(s0, s1 - 1), calls=self.calls_in(s0, s1))
        stmt.body = self.branch_items()
        stmt.end_line = self.toks[self.pos - 1].line
        return stmt

    def parse_try(self) -> AstStmt:
        start = self.pos
        while self.tok is not None and not self.at("{"):
            if self.tok.text in _OPEN:
                self.skip_balanced()
            else:
                self.pos += 1
        end = self.skip_balanced()
        while self.at("catch"):
            while self.tok is not None and not self.at("{"):
                if self.tok.text in _OPEN:
                    self.skip_balanced()
                else:
                    self.pos += 1
            end = self.skip_balanced()
        return AstStmt(StmtKind.EXPRESSION, self.span(start, end), calls=self.calls_in(start, end), opaque=True)

    def _is_declaration(self, s: int, e: int) -> bool:
        toks = self.toks[s:e]
        if not toks:
            return False
        first = toks[0]
        if first.text == "(" and len(toks) > 2:
            # tuple declaration: (bool ok, bytes memory data) = ...
            inner = toks[1:]
            for a, b in zip(inner, inner[1:]):
                if a.text in (")",):
                    break
                if a.text == ",":
                    continue
                if ELEMENTARY_TYPE.match(a.text) or (a.kind is TokenKind.IDENT and b.kind is TokenKind.IDENT):
                    return b.kind is TokenKind.IDENT or b.text in DATA_LOCATIONS or b.text == "payable"
                return False
            return False
        if first.text == "mapping" or ELEMENTARY_TYPE.match(first.text):
            if len(toks) > 1 and toks[1].text in (".", "("):
                return False  # address(x).transfer / bytes.concat
            return True
        if first.kind is TokenKind.IDENT and len(toks) > 1:
            j = 1
            while j + 1 < len(toks) and toks[j].text == "." and toks[j + 1].kind is TokenKind.IDENT:
                j += 2
            while j + 1 < len(toks) and toks[j].text == "[":
                depth, k = 0, j
                while k < len(toks):
                    if toks[k].text == "[":
                        depth += 1
                    elif toks[k].text == "]":
                        depth -= 1
                        if depth == 0:
                            break
                    k += 1
                j = k + 1
            if j < len(toks) and (toks[j].kind is TokenKind.IDENT or toks[j].text in DATA_LOCATIONS):
                return True
        return False

    def calls_in(self, s: int, e: int) -> list[CallRef]:
        return _find_calls(self.toks, s, e)


# -- helpers -------------------------------------------------------------------


def _split_top(toks: list[Token], s: int, e: int, sep: str) -> list[tuple[int, int]]:
    parts, depth, begin = [], 0, s
    for k in range(s, e):
        t = toks[k]
        if t.kind is not TokenKind.PUNCT:
            continue
        if t.text in _OPEN:
            depth += 1
        elif t.text in _CLOSE:
            depth -= 1
        elif t.text == sep and depth == 0:
            parts.append((begin, k))
            begin = k + 1
    parts.append((begin, e))
    return parts


def _split_params(toks: list[Token]) -> list[tuple[str, str]]:
    params = []
    if not toks:
        return params
    for s, e in _split_top(toks, 0, len(toks), ","):
        part = toks[s:e]
        if not part:
            continue
        typ = part[0].text
        if len(part) > 1 and part[1].text == "payable":
            typ += " payable"
        name = part[-1].text if len(part) > 1 and part[-1].kind is TokenKind.IDENT else ""
        params.append((name, typ))
    return params


def _declared_name(toks: list[Token]) -> tuple[str, str]:
    """(name, type) of a single variable declaration, or ("", "")."""
    if not toks:
        return "", ""
    end = len(toks)
    depth = 0
    for k, t in enumerate(toks):
        if t.text in _OPEN and t.kind is TokenKind.PUNCT:
            depth += 1
        elif t.text in _CLOSE and t.kind is TokenKind.PUNCT:
            depth -= 1
        elif t.text == "=" and depth == 0:
            end = k
            break
    for k in range(end - 1, 0, -1):
        if toks[k].kind is TokenKind.IDENT:
            typ = toks[0].text
            if len(toks) > 1 and toks[1].text == "payable":
                typ += " payable"
            return toks[k].text, typ
        if toks[k].kind is TokenKind.KEYWORD and toks[k].text in VISIBILITY | DATA_LOCATIONS | {"constant", "immutable", "payable", "override"}:
            continue
        break
    return "", ""


def _tuple_declared(toks: list[Token]) -> list[tuple[str, str]]:
    close = next((k for k, t in enumerate(toks) if t.text == ")"), len(toks))
    out = []
    for s, e in _split_top(toks, 1, close, ","):
        part = toks[s:e]
        if len(part) >= 2 and part[-1].kind is TokenKind.IDENT:
            out.append((part[-1].text, part[0].text))
    return out


def _chain_back(toks: list[Token], k: int, lo: int) -> tuple[str, str]:
    """Walk a member-access chain backwards from the member at ``k``.

    Returns (chain text without argument lists, root text).
    """
    pieces = [toks[k].text]
    j = k - 1
    root = ""
    while j >= lo and toks[j].text == "." and toks[j].kind is TokenKind.PUNCT:
        j -= 1
        if j < lo:
            break
        t = toks[j]
        if t.kind is TokenKind.PUNCT and t.text in (")", "]"):
            opener = "(" if t.text == ")" else "["
            depth = 0
            while j >= lo:
                if toks[j].text == t.text:
                    depth += 1
                elif toks[j].text == opener:
                    depth -= 1
                    if depth == 0:
                        break
                j -= 1
            j -= 1
            if j >= lo and toks[j].kind in (TokenKind.IDENT, TokenKind.KEYWORD):
                pieces.append(toks[j].text + ("()" if opener == "(" else "[]"))
                root = toks[j].text
                j -= 1
            else:
                pieces.append("()" if opener == "(" else "[]")
                root = ""
                break
        elif t.kind in (TokenKind.IDENT, TokenKind.KEYWORD):
            pieces.append(t.text)
            root = t.text
            j -= 1
        else:
            break
    return ".".join(reversed(pieces)), root


def _find_calls(toks: list[Token], s: int, e: int) -> list[CallRef]:
    calls: list[CallRef] = []
    for k in range(s, e):
        t = toks[k]
        if t.kind not in (TokenKind.IDENT, TokenKind.KEYWORD) or k + 1 >= len(toks):
            continue
        nxt = toks[k + 1]
        if nxt.kind is not TokenKind.PUNCT or nxt.text not in ("(", "{"):
            continue
        prev = toks[k - 1] if k - 1 >= 0 else None
        if prev is not None and prev.text == "." and prev.kind is TokenKind.PUNCT:
            if nxt.text == "{" and t.text not in LOW_LEVEL_CALLS:
                continue
            chain, root = _chain_back(toks, k, s)
            calls.append(CallRef(name=chain, member=True, method=t.text, root=root))
        elif nxt.text == "(" and t.kind is TokenKind.IDENT:
            if prev is not None and prev.text in ("new", "function", "emit", "event"):
                continue
            if t.text in BUILTIN_FUNCTIONS or ELEMENTARY_TYPE.match(t.text):
                continue
            calls.append(CallRef(name=t.text, member=False, method=t.text))
    return calls


def _is_contract_type(typ: str, contract_names: set[str], structs: set[str]) -> bool:
    base = typ.split()[0] if typ else ""
    if base.startswith("address"):
        return True
    if not base or ELEMENTARY_TYPE.match(base) or base == "mapping":
        return False
    return base in contract_names or (base[:1].isupper() and base not in structs)


def _resolve_calls(contract: AstContract, unit: list[AstContract], structs: set[str]):
    """Classify each call as internal (same unit) or external; drop the rest."""
    names = {c.name for c in unit}
    libraries = {c.name for c in unit if c.kind == "library"}
    for fn in contract.functions:
        env = dict(contract.state_vars)
        env.update({n: t for n, t in fn.params if n})
        for stmt in fn.statements():
            for n, t in stmt.declared:
                env[n] = t
        local_fns = {f.name for f in contract.functions}
        unit_fns = {f.name for c in unit for f in c.functions}
        for stmt in fn.statements():
            kept: list[CallRef] = []
            seen: set[tuple[str, bool]] = set()
            for ref in stmt.calls:
                if not ref.member:
                    if ref.name in names or ref.name not in local_fns | unit_fns:
                        continue
                    ref.external = False
                else:
                    parts = ref.name.split(".")
                    low = next((i for i, p in enumerate(parts) if p in LOW_LEVEL_CALLS), None)
                    if ref.root == "super":
                        ref = CallRef(ref.method, False, ref.method)
                        if ref.name not in unit_fns:
                            continue
                    elif low is not None and low > 0:
                        ref.name = ".".join(parts[: low + 1])
                        ref.external = True
                    elif ref.root in BUILTIN_ROOTS or ref.root in libraries or ref.root in names:
                        continue
                    elif ref.root == "this" or (ref.root == "msg" and len(parts) > 2 and parts[1] == "sender"):
                        ref.external = True
                    elif ref.root in env and _is_contract_type(env[ref.root], names, structs):
                        ref.external = True
                    else:
                        continue
                key = (ref.name, ref.external)
                if key not in seen:
                    seen.add(key)
                    kept.append(ref)
            stmt.calls = kept


def _dedupe_names(contracts: list[AstContract]):
    seen: dict[str, int] = {}
    for c in contracts:
        for fn in c.functions:
            q = fn.qualified_name
            if q in seen:
                seen[q] += 1
                fn.qualified_name = f"{q}#{seen[q]}"
            else:
                seen[q] = 1


def parse_unit(tokens: list[Token], file: str = "<input>") -> list[AstContract]:
    """Parse a token stream into contracts with their implemented functions."""
    if not tokens:
        return []
    return _Parser(tokens, file).parse_unit()


def parse_source(source: str, file: str = "<input>") -> list[AstContract]:
    return parse_unit(tokenize(source), file)
