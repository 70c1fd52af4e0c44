"""Tokenizer for the supported Solidity subset."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from mando.errors import LexError


class TokenKind(str, enum.Enum):
    IDENT = "Ident"
    KEYWORD = "Keyword"
    NUMBER = "Number"
    STRING = "String"
    PUNCT = "Punct"


KEYWORDS = frozenset(
    """
    pragma import contract interface library abstract is using for struct enum event error
    modifier function constructor fallback receive returns return if else while do break
    continue throw emit new delete mapping public private internal external pure view
    payable constant immutable virtual override memory storage calldata indexed anonymous
    assembly unchecked try catch true false
    """.split()
)

_PUNCT = [
    ">>>=", "<<=", ">>=", ">>>", "**", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "<<", ">>",
    "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "=>", ":=", "->",
    "{", "}", "(", ")", "[", "]", ";", ",", ".", "?", ":", "=", "+", "-", "*", "/", "%",
    "!", "~", "<", ">", "&", "|", "^",
]  # fmt: skip

_NUMBER = re.compile(r"0[xX][0-9a-fA-F_]*|(?:\d[\d_]*)?\.?\d[\d_]*(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    line: int

    def is_(self, text: str) -> bool:
        return self.text == text and self.kind in (TokenKind.KEYWORD, TokenKind.PUNCT, TokenKind.IDENT)


def tokenize(source: str) -> list[Token]:
    """Split source text into tokens, dropping comments and whitespace.

    Raises LexError on unterminated strings or comments and on characters
    outside the language.
    """
    tokens: list[Token] = []
    i, line, n = 0, 1, len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            i += 1
        elif c in " \t\r\f\v﻿":
            i += 1
        elif source.startswith("//", i):
            j = source.find("\n", i)
            i = n if j < 0 else j
        elif source.startswith("/*", i):
            j = source.find("*/", i + 2)
            if j < 0:
                raise LexError(line, "unterminated block comment")
            line += source.count("\n", i, j)
            i = j + 2
        elif c in "\"'" or (c in "uh" and _string_prefix(source, i)):
            start_line = line
            if c in "uh":
                i += 3 if c == "h" else 7
            quote = source[i]
            j = i + 1
            while True:
                if j >= n or source[j] == "\n":
                    raise LexError(start_line, "unterminated string literal")
                if source[j] == "\\":
                    j += 2
                    continue
                if source[j] == quote:
                    break
                j += 1
            tokens.append(Token(TokenKind.STRING, source[i : j + 1], start_line))
            i = j + 1
        elif c.isdigit() or (c == "." and source[i + 1 : i + 2].isdigit()):
            m = _NUMBER.match(source, i)
            tokens.append(Token(TokenKind.NUMBER, m.group(0), line))
            i = m.end()
        elif c.isalpha() or c in "_$":
            m = _IDENT.match(source, i)
            word = m.group(0)
            kind = TokenKind.KEYWORD if word in KEYWORDS else TokenKind.IDENT
            tokens.append(Token(kind, word, line))
            i = m.end()
        else:
            for p in _PUNCT:
                if source.startswith(p, i):
                    tokens.append(Token(TokenKind.PUNCT, p, line))
                    i += len(p)
                    break
            else:
                raise LexError(line, f"unexpected character {c!r}")
    return tokens


def _string_prefix(source: str, i: int) -> bool:
    for prefix in ("hex", "unicode"):
        if source.startswith(prefix, i) and source[i + len(prefix) : i + len(prefix) + 1] in ("'", '"'):
            return i == 0 or not (source[i - 1].isalnum() or source[i - 1] in "_$")
    return False
