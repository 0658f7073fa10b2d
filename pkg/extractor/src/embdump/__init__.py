"""Dump image embeddings to EMBD/LBLS/PRED files.

Thin extraction client: runs a vision backbone over an image folder and
writes the binary formats consumed by the transfermetrics toolkit. No
metric math lives here; the boundary between the two packages is exactly
the file format.
"""

from embdump.extract import ExtractionError, ExtractionJob, extract
from embdump.backbones import BACKBONES, build_backbone
from embdump.writers import write_embeddings, write_labels, write_predictions

__version__ = "0.1.0"

__all__ = [
    "BACKBONES",
    "ExtractionError",
    "ExtractionJob",
    "build_backbone",
    "extract",
    "write_embeddings",
    "write_labels",
    "write_predictions",
]
