"""CMF1 and manifest writers.

This intentionally re-implements the downstream consumer's on-disk formats
from their byte-level description rather than importing its code: the files
are the interface. CMF1 is 4 bytes ASCII magic "CMF1", uint32-LE rows,
uint32-LE cols, then rows*cols float32-LE values row-major, nothing else.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ExportError

_HEADER = struct.Struct("<4sII")


def write_cmf1(path, matrix: np.ndarray) -> None:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ExportError(f"CMF1 payload must be a non-empty 2-D matrix, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ExportError("refusing to write non-finite values")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(b"CMF1", m.shape[0], m.shape[1]))
        f.write(np.ascontiguousarray(m, dtype="<f4").tobytes())


def write_manifest(path, class_names, image_file: str, text_file: str,
                   rows) -> None:
    """rows: iterable of (index, label, split) with split in {train, test}."""
    doc = {
        "class_names": list(class_names),
        "image_features": image_file,
        "text_embeddings": text_file,
        "cross_domain": False,
        "rows": [
            {"index": int(i), "label": int(l), "split": str(s)}
            for i, l, s in rows
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


def l2_normalize_rows(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms < 1e-30):
        raise ExportError("embedding row with zero norm")
    return m / norms
