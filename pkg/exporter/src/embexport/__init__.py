"""Export per-word-token transformer embeddings and attention tensors into
the JERX-EMB binary format."""

from .export import (
    AlignmentError,
    ModelLoadError,
    encode_sentence,
    export,
    load_model,
)
from .format import ExportRecord, write_emb_file
from .patterns import detect_pattern, find_patterns, stripe_mass

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "ExportRecord",
    "ModelLoadError",
    "detect_pattern",
    "encode_sentence",
    "export",
    "find_patterns",
    "load_model",
    "stripe_mass",
    "write_emb_file",
]
