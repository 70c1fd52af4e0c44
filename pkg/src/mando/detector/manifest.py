"""Dataset manifests: one JSON object per line.

Each line has ``path`` (a ``.sol`` or ``.json`` graph file, relative to the
manifest), ``category`` (a bug category, or ``null`` for clean contracts
shared by every category), ``label`` (``clean`` or ``buggy``) and
``buggy_lines`` (a list of ``[file, line]`` pairs, empty for clean entries).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from mando.errors import ManifestError


class BugCategory(str, enum.Enum):
    AccessControl = "AccessControl"
    Arithmetic = "Arithmetic"
    DenialOfService = "DenialOfService"
    FrontRunning = "FrontRunning"
    Reentrancy = "Reentrancy"
    TimeManipulation = "TimeManipulation"
    UncheckedLowLevelCalls = "UncheckedLowLevelCalls"


CATEGORIES = tuple(c.value for c in BugCategory)
LABELS = ("clean", "buggy")


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    category: Optional[str]
    label: str
    buggy_lines: tuple[tuple[str, int], ...] = field(default_factory=tuple)

    @property
    def is_buggy(self) -> bool:
        return self.label == "buggy"

    @property
    def stratum(self) -> tuple[str, str]:
        return (self.category or "", self.label)


def _entry(obj, base: Path, where: str) -> ManifestEntry:
    if not isinstance(obj, dict):
        raise ManifestError(f"{where}: expected a JSON object")
    for key in ("path", "label"):
        if key not in obj:
            raise ManifestError(f"{where}: missing '{key}'")
    label = obj["label"]
    if label not in LABELS:
        raise ManifestError(f"{where}: label must be one of {LABELS}, got {label!r}")
    category = obj.get("category")
    if category is not None and category not in CATEGORIES:
        raise ManifestError(f"{where}: unknown category {category!r}")
    if label == "buggy" and category is None:
        raise ManifestError(f"{where}: buggy entries need a category")
    lines = []
    for item in obj.get("buggy_lines") or []:
        if not (isinstance(item, (list, tuple)) and len(item) == 2 and isinstance(item[1], int)):
            raise ManifestError(f"{where}: buggy_lines items must be [file, line]")
        lines.append((str(item[0]), int(item[1])))
    if bool(lines) != (label == "buggy"):
        raise ManifestError(f"{where}: buggy_lines must be non-empty exactly for buggy entries")
    path = Path(obj["path"])
    return ManifestEntry(path if path.is_absolute() else base / path, category, label, tuple(lines))


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc.strerror}") from None
    entries = []
    for no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{no}: invalid JSON ({exc.msg})") from None
        entries.append(_entry(obj, path.parent, f"{path}:{no}"))
    return entries


def categories_in(entries: list[ManifestEntry]) -> list[str]:
    return sorted({e.category for e in entries if e.category is not None})


def select_category(entries: list[ManifestEntry], category: str) -> list[ManifestEntry]:
    """Entries of ``category`` plus the shared clean entries."""
    return [e for e in entries if e.category in (category, None)]
