"""Solidity-subset frontend and graph-interchange reader/writer."""

from __future__ import annotations

from pathlib import Path

from mando.frontend.graphs import bundle_from_source, build_hcfg, build_hcg
from mando.frontend.interchange import bundle_from_dict, bundle_to_dict, canonical_json, export_json, import_json
from mando.frontend.lexer import Token, TokenKind, tokenize
from mando.frontend.parser import parse_source, parse_unit
from mando.hetgraph import ContractGraphBundle

__all__ = [
    "Token",
    "TokenKind",
    "bundle_from_dict",
    "bundle_from_source",
    "bundle_to_dict",
    "build_hcfg",
    "build_hcg",
    "canonical_json",
    "export_json",
    "import_json",
    "load_bundle",
    "parse_source",
    "parse_unit",
    "tokenize",
]


def load_bundle(path: str | Path, file_label: str | None = None) -> ContractGraphBundle:
    """Load a ``.sol`` source or a ``.json`` interchange file."""
    path = Path(path)
    if path.suffix == ".json":
        return import_json(path)
    return bundle_from_source(path.read_text(encoding="utf-8"), file_label or path.name)
