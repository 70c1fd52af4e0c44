"""Generated Solidity corpus with planted vulnerability motifs.

Clean contracts combine a handful of benign function templates.  A planted
contract additionally carries one motif function:

* ``Reentrancy``: an external call issued before the balance write and a log
  statement, inside a one-armed ``if``;
* ``UncheckedLowLevelCalls``: a ``send`` whose result is dropped, followed
  by ``return``.

The clean templates are written so that no clean statement or function has
the control-flow neighbourhood of a motif statement or motif function (for
example, no clean function opens with ``if``, no clean statement sits
directly before a ``return`` and no clean code chains three expression
statements).  Node-type features alone therefore separate planted code
from clean code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

MOTIF_CATEGORIES = ("Reentrancy", "UncheckedLowLevelCalls")

# each template returns (lines, buggy line offsets within them)
Template = Callable[[int, np.random.Generator], tuple[list[str], list[int]]]


def _require_return(k, rng):
    return [
        f"    function get_{k}(uint _x) public view returns (uint) {{",
        f"        require(_x > {rng.integers(1, 9)});",
        f"        return balances[msg.sender] + _x;",
        "    }",
    ], []


def _accumulate(k, rng):
    return [
        f"    function add_{k}(uint _x) public {{",
        f"        uint v_{k} = _x * {rng.integers(2, 9)};",
        f"        total += v_{k};",
        "    }",
    ], []


def _if_else(k, rng):
    return [
        f"    function set_{k}(uint _x) public {{",
        "        require(_x != 0);",
        "        if (_x > total) {",
        "            total = _x;",
        "        } else {",
        f"            total = total + {rng.integers(1, 9)};",
        "        }",
        "    }",
    ], []


def _loop(k, rng):
    return [
        f"    function sum_{k}(uint _n) public {{",
        f"        for (uint i = 0; i < _n; i++) {{",
        "            total += i;",
        "        }",
        "    }",
    ], []


def _safe_withdraw(k, rng):
    return [
        f"    function take_{k}(uint _am) public {{",
        "        require(balances[msg.sender] >= _am);",
        "        balances[msg.sender] -= _am;",
        "        msg.sender.transfer(_am);",
        "    }",
    ], []


def _assign(k, rng):
    return [
        f"    function own_{k}(address _o) public {{",
        "        owner = _o;",
        "    }",
    ], []


def _emit(k, rng):
    return [
        f"    function note_{k}(uint _v) public {{",
        f"        emit Noted(_v + {rng.integers(0, 9)});",
        "    }",
    ], []


def _reentrancy(k, rng):
    return [
        f"    function withdraw_{k}(uint _am) public {{",
        "        if (_am <= balances[msg.sender]) {",
        "            msg.sender.call.value(_am)();",
        "            balances[msg.sender] -= _am;",
        "            emit Noted(_am);",
        "        }",
        "    }",
    ], [2]


def _unchecked_send(k, rng):
    return [
        f"    function payout_{k}(address _to, uint _v) public returns (bool) {{",
        "        uint amount = _v;",
        "        _to.send(amount);",
        "        return true;",
        "    }",
    ], [2]


CLEAN_TEMPLATES: tuple[Template, ...] = (
    _require_return,
    _accumulate,
    _if_else,
    _loop,
    _safe_withdraw,
    _assign,
    _emit,
)
MOTIFS: dict[str, Template] = {"Reentrancy": _reentrancy, "UncheckedLowLevelCalls": _unchecked_send}


@dataclass
class SyntheticContract:
    name: str
    source: str
    category: Optional[str]
    buggy_lines: list[int]

    @property
    def label(self) -> str:
        return "buggy" if self.buggy_lines else "clean"


def generate_contract(name: str, rng: np.random.Generator, motif: Optional[str] = None) -> SyntheticContract:
    n_funcs = int(rng.integers(3, 7))
    chosen = [CLEAN_TEMPLATES[int(i)] for i in rng.integers(0, len(CLEAN_TEMPLATES), size=n_funcs)]
    if motif is not None:
        chosen.insert(int(rng.integers(0, n_funcs + 1)), MOTIFS[motif])
    lines = [
        "pragma solidity ^0.4.24;",
        "",
        f"contract {name} {{",
        "    mapping(address => uint) balances;",
        "    uint total;",
        "    address owner;",
        "    event Noted(uint v);",
        "",
    ]
    buggy = []
    for k, tmpl in enumerate(chosen):
        body, marks = tmpl(k, rng)
        buggy.extend(len(lines) + 1 + m for m in marks)
        lines.extend(body)
        lines.append("")
    lines.append("}")
    return SyntheticContract(name, "\n".join(lines) + "\n", motif, buggy)


def generate_corpus(
    out_dir: str | Path, n_clean: int = 100, n_planted: int = 100, motifs=MOTIF_CATEGORIES, seed: int = 0
) -> Path:
    """Write ``.sol`` files and a JSON-lines manifest; return the manifest path.

    Clean contracts carry no category and are shared by every motif.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    contracts = [generate_contract(f"Clean{i:03d}", rng) for i in range(n_clean)]
    for motif in motifs:
        tag = "".join(c for c in motif if c.isupper())
        contracts += [generate_contract(f"{tag}{i:03d}", rng, motif) for i in range(n_planted)]
    manifest = out / "manifest.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for c in contracts:
            file = f"{c.name}.sol"
            (out / file).write_text(c.source, encoding="utf-8")
            entry = {
                "path": file,
                "category": c.category,
                "label": c.label,
                "buggy_lines": [[file, ln] for ln in c.buggy_lines],
            }
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    return manifest
