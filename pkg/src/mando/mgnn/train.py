"""Full-batch training under the one-cycle schedule, and inference."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import torch

from mando.errors import MandoError
from mando.mgnn.batch import GraphBatch
from mando.mgnn.model import MgnnModel, loss
from mando.mgnn.schedule import OneCycleSchedule

# learning-rate ranges and epoch budgets per task
TASK_DEFAULTS = {
    "coarse": {"lr_start": 0.0005, "lr_max": 0.01, "epochs": 50},
    "fine": {"lr_start": 0.0002, "lr_max": 0.005, "epochs": 100},
}


@dataclass
class TrainConfig:
    task: str = "fine"
    epochs: Optional[int] = None
    lr_start: Optional[float] = None
    lr_max: Optional[float] = None
    pct_start: float = 0.3
    betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 0.0
    class_weight: str = "balanced"
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASK_DEFAULTS:
            raise ValueError(f"task must be one of {sorted(TASK_DEFAULTS)}")
        if self.class_weight not in ("none", "balanced"):
            raise ValueError("class_weight must be 'none' or 'balanced'")
        defaults = TASK_DEFAULTS[self.task]
        for key, value in defaults.items():
            if getattr(self, key) is None:
                setattr(self, key, value)
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        self.betas = tuple(self.betas)

    def schedule(self) -> OneCycleSchedule:
        return OneCycleSchedule(self.lr_start, self.lr_max, self.epochs, self.pct_start)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d


@dataclass
class History:
    loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {"loss": self.loss, "lr": self.lr, "seconds": self.seconds}


def class_weights(labels: torch.Tensor, n_classes: int, mode: str, dtype: torch.dtype) -> Optional[torch.Tensor]:
    """Inverse-frequency weights normalised to mean 1 over present classes."""
    if mode == "none":
        return None
    counts = torch.bincount(labels, minlength=n_classes).to(dtype)
    present = counts > 0
    w = torch.zeros(n_classes, dtype=dtype)
    w[present] = labels.numel() / (present.sum() * counts[present])
    return w


def train(model: MgnnModel, batch: GraphBatch, labels: torch.Tensor, cfg: TrainConfig) -> History:
    """Optimise ``model`` in place; one optimiser step per epoch over the whole batch."""
    expected = batch.n_nodes if cfg.task == "fine" else batch.n_graphs
    if labels.shape[0] != expected:
        raise MandoError(f"{labels.shape[0]} labels for {expected} {cfg.task} targets")
    labels = labels.to(torch.int64)
    dtype = model.mlp_b1.dtype
    batch = batch.to(dtype)
    weight = class_weights(labels, model.cfg.n_classes, cfg.class_weight, dtype)
    history = History()
    if cfg.epochs == 0:
        return history
    sched = cfg.schedule()
    opt = torch.optim.Adam(model.parameters(), lr=sched.lr(0), betas=cfg.betas, weight_decay=cfg.weight_decay)
    gen = torch.Generator().manual_seed(cfg.seed)
    start = time.perf_counter()
    model.train()
    for epoch in range(cfg.epochs):
        lr = sched.lr(epoch)
        for group in opt.param_groups:
            group["lr"] = lr
        opt.zero_grad()
        value = loss(model(batch, cfg.task, gen), labels, weight)
        if not torch.isfinite(value):
            raise MandoError(f"non-finite loss at epoch {epoch}")
        value.backward()
        opt.step()
        history.loss.append(float(value.detach()))
        history.lr.append(lr)
    model.eval()
    history.seconds = time.perf_counter() - start
    return history


@torch.no_grad()
def predict_proba(model: MgnnModel, batch: GraphBatch, task: str) -> np.ndarray:
    """Probability of the positive (buggy) class per node or per graph."""
    model.eval()
    logits = model(batch.to(model.mlp_b1.dtype), task)
    return torch.softmax(logits, dim=-1)[:, 1].numpy().astype(np.float64)
