"""Metapath attention network: packing, model, training, checkpoints."""

from mando.mgnn.batch import GraphBatch, GraphInput, encode_batch, paths_of, vocabulary_of
from mando.mgnn.checkpoint import load_checkpoint, read_header, save_checkpoint
from mando.mgnn.model import (
    MgnnConfig,
    MgnnModel,
    attention_weights,
    classify,
    coarse_readout,
    fine_readout,
    loss,
    metapath_embedding,
    node_embedding,
    transform,
)
from mando.mgnn.schedule import OneCycleSchedule
from mando.mgnn.train import TASK_DEFAULTS, History, TrainConfig, predict_proba, train

__all__ = [
    "GraphBatch",
    "GraphInput",
    "History",
    "MgnnConfig",
    "MgnnModel",
    "OneCycleSchedule",
    "TASK_DEFAULTS",
    "TrainConfig",
    "attention_weights",
    "classify",
    "coarse_readout",
    "encode_batch",
    "fine_readout",
    "load_checkpoint",
    "loss",
    "metapath_embedding",
    "node_embedding",
    "paths_of",
    "predict_proba",
    "read_header",
    "save_checkpoint",
    "train",
    "transform",
    "vocabulary_of",
]
