"""Federated edge learning harness."""

from .data import Dataset, PartitionError, area_labels, load_dataset, partition
from .model import Mlp
from .training import (
    FeelConfig,
    ModelState,
    RoundTrace,
    TrainingDivergedError,
    aam_metrics,
    aam_step,
    aggregate_round,
    default_alpha,
    local_gradient,
    train,
    update,
)
