"""Run configuration: defaults, TOML/JSON loading and the resolved echo."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from mando.detector.manifest import CATEGORIES
from mando.errors import MandoError
from mando.mgnn.model import MgnnConfig
from mando.mgnn.train import TrainConfig
from mando.topoembed import FEATURE_METHODS, WalkConfig

TASKS = ("coarse", "fine", "both")


class ConfigError(MandoError):
    pass


@dataclass
class RunConfig:
    task: str = "both"
    category: Optional[str] = None
    feature_method: str = "onehot"
    embed_dim: int = 128
    heads: int = 8
    head_dim: int = 32
    hidden: int = 128
    dropout: float = 0.6
    activation: str = "elu"
    coarse_lr_start: float = 0.0005
    coarse_lr_max: float = 0.01
    coarse_epochs: int = 50
    fine_lr_start: float = 0.0002
    fine_lr_max: float = 0.005
    fine_epochs: int = 100
    class_weight: str = "balanced"
    seed: int = 0
    seeds: int = 20
    train_frac: float = 0.7
    split_tolerance: float = 0.05
    threshold: float = 0.5
    walks_per_node: int = 10
    walk_length: int = 80
    window: int = 5
    negatives: int = 5
    p: float = 1.0
    q: float = 1.0
    walk_epochs: int = 1
    scheme_top_k: int = 8
    manifest: Optional[str] = None
    output_dir: Optional[str] = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.category is not None and self.category not in CATEGORIES:
            raise ConfigError(f"unknown category {self.category!r}")
        if self.feature_method not in FEATURE_METHODS:
            raise ConfigError(f"feature_method must be one of {FEATURE_METHODS}")
        if self.seeds < 1:
            raise ConfigError("seeds must be at least 1")
        if not 0 < self.train_frac < 1:
            raise ConfigError("train_frac must lie in (0, 1)")
        if not 0 < self.threshold < 1:
            raise ConfigError("threshold must lie in (0, 1)")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def replace(self, **overrides) -> "RunConfig":
        data = self.to_dict()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(data)

    def model_config(self) -> MgnnConfig:
        return MgnnConfig(
            in_dim=self.embed_dim,
            type_dim=self.embed_dim,
            heads=self.heads,
            head_dim=self.head_dim,
            hidden=self.hidden,
            dropout=self.dropout,
            activation=self.activation,
        )

    def train_config(self, task: str, seed: int) -> TrainConfig:
        return TrainConfig(
            task=task,
            epochs=getattr(self, f"{task}_epochs"),
            lr_start=getattr(self, f"{task}_lr_start"),
            lr_max=getattr(self, f"{task}_lr_max"),
            class_weight=self.class_weight,
            seed=seed,
        )

    def walk_config(self, seed: int) -> WalkConfig:
        return WalkConfig(
            walks_per_node=self.walks_per_node,
            walk_length=self.walk_length,
            p=self.p,
            q=self.q,
            window=self.window,
            negatives=self.negatives,
            epochs=self.walk_epochs,
            dim=self.embed_dim,
            seed=seed,
        )


def load_config(path: Optional[str | Path]) -> RunConfig:
    """Read a TOML or JSON config file; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        if path.suffix == ".json":
            data = json.loads(raw.decode("utf-8"))
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a table of settings")
    return RunConfig.from_dict(data)


def write_echo(cfg: RunConfig, out_dir: str | Path) -> Path:
    """Write the resolved configuration as ``config.json`` (loadable by :func:`load_config`)."""
    target = Path(out_dir) / "config.json"
    target.write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return target
