"""Label mapping, splits, metrics and the two-phase detection pipeline.

The pipeline lives in :mod:`mando.detector.pipeline` and is imported explicitly.
"""

from mando.detector.labels import map_line_labels
from mando.detector.manifest import (
    CATEGORIES,
    BugCategory,
    ManifestEntry,
    categories_in,
    load_manifest,
    select_category,
)
from mando.detector.metrics import AggregateReport, MetricsReport, aggregate, f1_scores
from mando.detector.split import Split, split

__all__ = [
    "AggregateReport",
    "BugCategory",
    "CATEGORIES",
    "ManifestEntry",
    "MetricsReport",
    "Split",
    "aggregate",
    "categories_in",
    "f1_scores",
    "load_manifest",
    "map_line_labels",
    "select_category",
    "split",
]
