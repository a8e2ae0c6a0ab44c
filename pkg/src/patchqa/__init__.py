"""Predicting program-repair patch correctness by scoring how well a
natural-language patch description answers its bug report."""

import os

# Training and scoring are sequential by design; multi-threaded BLAS only adds
# scheduling jitter (and contention on small kernels). Honor explicit user
# settings, otherwise pin to one thread. Must happen before numpy loads.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

__version__ = "0.1.0"

from .corpus import Dataset, dedup_patches, load_dataset, save_dataset
from .qa_model import ModelConfig, QaModel, predict, score, train

__all__ = [
    "Dataset",
    "ModelConfig",
    "QaModel",
    "dedup_patches",
    "load_dataset",
    "predict",
    "save_dataset",
    "score",
    "train",
]
