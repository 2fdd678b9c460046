"""Embedding storage: the CMF1 binary matrix format, task manifests, and
seeded K-shot episode sampling.

CMF1 layout: 4 bytes ASCII magic "CMF1", uint32-LE rows, uint32-LE cols,
then rows*cols float32-LE values in row-major order. Nothing else; trailing
bytes are an error.

Shot sampling uses numpy's PCG64 generator, which has a stable, documented
bit stream; the same (manifest, K, seed) always yields the same episode.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    DegenerateRowError,
    FormatError,
    InsufficientShotsError,
    NonFiniteValueError,
    TruncatedFileError,
    ValidationError,
)

MAGIC = b"CMF1"
_HEADER = struct.Struct("<4sII")


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Dense row-major matrix of real-valued feature vectors.

    Held as float64 in memory; files store float32, so a matrix loaded from
    disk round-trips bit-exactly.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"expected 2-D data, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"matrix must be at least 1x1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            r, c = np.argwhere(~np.isfinite(arr))[0]
            raise NonFiniteValueError(f"non-finite value at row {r}, col {c}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


def save_feature_file(path, m: EmbeddingMatrix) -> None:
    """Write a matrix as CMF1. Values are cast to float32."""
    payload = np.ascontiguousarray(m.data, dtype="<f4")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, m.rows, m.cols))
        f.write(payload.tobytes())


def load_feature_file(path) -> EmbeddingMatrix:
    """Read a CMF1 file, validating magic, size, and finiteness."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise TruncatedFileError(f"{path}: file shorter than CMF1 header")
    magic, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if rows < 1 or cols < 1:
        raise FormatError(f"{path}: invalid dimensions {rows}x{cols}")
    expected = _HEADER.size + 4 * rows * cols
    if len(raw) < expected:
        raise TruncatedFileError(
            f"{path}: payload has {len(raw) - _HEADER.size} bytes, "
            f"header promises {4 * rows * cols}"
        )
    if len(raw) > expected:
        raise FormatError(f"{path}: {len(raw) - expected} trailing bytes")
    values = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(rows, cols)
    if not np.all(np.isfinite(values)):
        r, c = np.argwhere(~np.isfinite(values))[0]
        raise NonFiniteValueError(f"{path}: non-finite value at row {r}, col {c}")
    return EmbeddingMatrix(values.astype(np.float64))


def l2_normalize(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Scale every row to unit Euclidean norm."""
    norms = np.linalg.norm(m.data, axis=1)
    bad = np.nonzero(norms < 1e-30)[0]
    if bad.size:
        raise DegenerateRowError(f"row {bad[0]} has zero norm")
    return EmbeddingMatrix(m.data / norms[:, None])


@dataclass(frozen=True)
class TaskManifest:
    """Class list plus per-row labels and train/test split tags."""

    class_names: tuple[str, ...]
    image_feature_file: str
    text_embedding_file: str
    indices: np.ndarray  # row indices into the image feature matrix
    labels: np.ndarray  # class index per row
    splits: np.ndarray  # "train" / "test" per row
    cross_domain: bool = False

    def __post_init__(self):
        C = len(self.class_names)
        if C < 1:
            raise ValidationError("manifest has no classes")
        idx = np.asarray(self.indices, dtype=np.int64)
        lab = np.asarray(self.labels, dtype=np.int64)
        spl = np.asarray(self.splits)
        if not (len(idx) == len(lab) == len(spl)):
            raise ValidationError("rows arrays have mismatched lengths")
        if len(np.unique(idx)) != len(idx):
            raise ValidationError("duplicate row index in manifest")
        if lab.min(initial=0) < 0 or lab.max(initial=-1) >= C:
            raise ValidationError(f"label out of range [0, {C})")
        unknown = set(np.unique(spl)) - {"train", "test"}
        if unknown:
            raise ValidationError(f"unknown split tags: {sorted(unknown)}")
        for c in range(C):
            if not np.any((lab == c) & (spl == "test")):
                raise ValidationError(f"class {self.class_names[c]!r} has no test rows")
            if not np.any((lab == c) & (spl == "train")):
                raise ValidationError(f"class {self.class_names[c]!r} has no train rows")
        for name, arr in (("indices", idx), ("labels", lab), ("splits", spl)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def train_rows(self) -> np.ndarray:
        return np.nonzero(self.splits == "train")[0]

    def test_rows(self) -> np.ndarray:
        return np.nonzero(self.splits == "test")[0]


def save_manifest(path, manifest: TaskManifest) -> None:
    doc = {
        "class_names": list(manifest.class_names),
        "image_features": manifest.image_feature_file,
        "text_embeddings": manifest.text_embedding_file,
        "cross_domain": manifest.cross_domain,
        "rows": [
            {"index": int(i), "label": int(l), "split": str(s)}
            for i, l, s in zip(manifest.indices, manifest.labels, manifest.splits)
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


def load_manifest(path) -> TaskManifest:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: not valid JSON ({e})") from e
    try:
        rows = doc["rows"]
        return TaskManifest(
            class_names=tuple(doc["class_names"]),
            image_feature_file=doc["image_features"],
            text_embedding_file=doc["text_embeddings"],
            indices=np.array([r["index"] for r in rows], dtype=np.int64),
            labels=np.array([r["label"] for r in rows], dtype=np.int64),
            splits=np.array([r["split"] for r in rows]),
            cross_domain=bool(doc.get("cross_domain", False)),
        )
    except KeyError as e:
        raise ValidationError(f"{path}: missing manifest key {e}") from e


@dataclass(frozen=True)
class ShotTask:
    """A resolved K-shot episode over a manifest."""

    K: int
    train_rows: tuple[tuple[int, int], ...]  # (manifest row position, label)
    test_rows: tuple[tuple[int, int], ...]
    seed: int


def sample_k_shot(manifest: TaskManifest, K: int, seed: int) -> ShotTask:
    """Draw exactly K train rows per class with a PCG64 stream keyed on seed.

    test_rows is always the manifest's full test split.
    """
    if K < 1:
        raise ValidationError(f"K must be >= 1, got {K}")
    rng = np.random.Generator(np.random.PCG64(seed))
    train = []
    for c, name in enumerate(manifest.class_names):
        pool = np.nonzero((manifest.labels == c) & (manifest.splits == "train"))[0]
        if len(pool) < K:
            raise InsufficientShotsError(
                f"class {name!r} has {len(pool)} train rows, need K={K}"
            )
        chosen = rng.choice(pool, size=K, replace=False)
        train.extend((int(manifest.indices[i]), c) for i in np.sort(chosen))
    test = [
        (int(manifest.indices[i]), int(manifest.labels[i]))
        for i in manifest.test_rows()
    ]
    return ShotTask(K=K, train_rows=tuple(train), test_rows=tuple(test), seed=seed)


@dataclass(frozen=True)
class TaskData:
    """Manifest plus its feature matrices, normalized and ready for use."""

    manifest: TaskManifest
    images: EmbeddingMatrix  # unit rows
    text: EmbeddingMatrix  # unit rows, one per class


def load_task_data(manifest_path) -> TaskData:
    """Load manifest + features, validate cross-references, L2-normalize."""
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    base = manifest_path.parent
    images = load_feature_file(base / manifest.image_feature_file)
    text = load_feature_file(base / manifest.text_embedding_file)
    if text.rows != manifest.num_classes:
        raise ValidationError(
            f"text embedding matrix has {text.rows} rows, "
            f"manifest lists {manifest.num_classes} classes"
        )
    if text.cols != images.cols:
        raise ValidationError(
            f"feature dimension mismatch: images d={images.cols}, text d={text.cols}"
        )
    if manifest.indices.max() >= images.rows:
        raise ValidationError("manifest row index beyond image feature matrix")
    return TaskData(manifest=manifest, images=l2_normalize(images), text=l2_normalize(text))
