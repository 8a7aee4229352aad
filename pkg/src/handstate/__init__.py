"""Hand-state estimation from fused exoskeleton-motor and surface-EMG streams."""

__version__ = "0.1.0"

from .core import (
    Dataset,
    Modality,
    ModelSpec,
    ModelState,
    RawSequence,
    TargetPair,
    load_dataset,
    load_model,
    save_dataset,
    save_model,
)
from .sync import AlignmentConfig, align

__all__ = [
    "AlignmentConfig",
    "Dataset",
    "Modality",
    "ModelSpec",
    "ModelState",
    "RawSequence",
    "TargetPair",
    "align",
    "load_dataset",
    "load_model",
    "save_dataset",
    "save_model",
    "__version__",
]
