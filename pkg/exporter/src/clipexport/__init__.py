"""Export CLIP-style image features and class text embeddings from a
per-class image folder into the CMF1 / manifest formats consumed by the
few-shot adapter trainer."""

from .backends import ColorWordsBackend, HFClipBackend, make_backend
from .errors import (
    EmptyClassError,
    ExportError,
    JobError,
    ModelUnavailableError,
)
from .export import ExportJob, ExportResult, export
from .writer import l2_normalize_rows, write_cmf1, write_manifest

__version__ = "0.1.0"
