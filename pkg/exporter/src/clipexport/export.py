"""Folder-to-files export pipeline.

Walks a per-class image folder tree in sorted order, embeds images and
class prompts with the chosen backend, and emits the CMF1 feature files
plus the task manifest the downstream few-shot trainer consumes. Given
fixed model weights the output is deterministic: file order is sorted
path order, class order is the class list order, and the train/test split
is a deterministic prefix rule (or an explicit list).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .backends import make_backend
from .errors import EmptyClassError, JobError
from .writer import l2_normalize_rows, write_cmf1, write_manifest

PLACEHOLDER = "[class]"


@dataclass(frozen=True)
class ExportJob:
    image_root: str
    output_dir: str
    model_id: str = "color-words"
    templates: tuple[str, ...] = ("a photo of a [class].",)
    class_names: tuple[str, ...] | None = None  # None: sorted subfolders
    train_fraction: float = 0.5
    train_list: tuple[str, ...] | None = None  # relative paths; overrides fraction

    def __post_init__(self):
        if not self.templates:
            raise JobError("need at least one prompt template")
        for t in self.templates:
            if t.count(PLACEHOLDER) != 1:
                raise JobError(
                    f"template {t!r} must contain exactly one {PLACEHOLDER} "
                    f"placeholder, found {t.count(PLACEHOLDER)}"
                )
        if self.train_list is None and not (0.0 < self.train_fraction < 1.0):
            raise JobError(
                f"train_fraction must lie in (0, 1), got {self.train_fraction}"
            )
        object.__setattr__(self, "templates", tuple(self.templates))
        if self.class_names is not None:
            object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.train_list is not None:
            object.__setattr__(self, "train_list", tuple(self.train_list))


@dataclass(frozen=True)
class ExportResult:
    manifest_path: Path
    num_images: int
    num_classes: int
    skipped: tuple[str, ...] = field(default=())


def _discover_classes(root: Path) -> tuple[str, ...]:
    names = sorted(p.name for p in root.iterdir() if p.is_dir())
    if not names:
        raise JobError(f"{root}: no class subfolders found")
    return tuple(names)


def _load_class_images(folder: Path):
    """Decodable images in sorted path order; skipped files are returned
    separately so the caller can warn and exclude them."""
    images, paths, skipped = [], [], []
    for p in sorted(folder.iterdir()):
        if not p.is_file():
            continue
        try:
            with Image.open(p) as img:
                images.append(img.convert("RGB").copy())
            paths.append(p)
        except (UnidentifiedImageError, OSError):
            skipped.append(str(p))
    return images, paths, skipped


def _split_tags(paths, root: Path, job: ExportJob):
    n = len(paths)
    if job.train_list is not None:
        train_set = set(job.train_list)
        tags = ["train" if str(p.relative_to(root)) in train_set else "test"
                for p in paths]
    else:
        n_train = max(1, min(n - 1, round(job.train_fraction * n)))
        tags = ["train"] * n_train + ["test"] * (n - n_train)
    if "train" not in tags or "test" not in tags:
        raise JobError(
            f"split leaves {paths[0].parent.name!r} without both a train "
            f"and a test row ({n} images)"
        )
    return tags


def export(job: ExportJob) -> ExportResult:
    root = Path(job.image_root)
    if not root.is_dir():
        raise JobError(f"image root {root} is not a directory")
    classes = job.class_names or _discover_classes(root)
    backend = make_backend(job.model_id)

    all_images, labels, splits, skipped = [], [], [], []
    for c, name in enumerate(classes):
        folder = root / name
        if not folder.is_dir():
            raise JobError(f"missing class folder {folder}")
        images, paths, bad = _load_class_images(folder)
        for b in bad:
            warnings.warn(f"skipping undecodable image {b}", stacklevel=2)
        skipped.extend(bad)
        if not images:
            raise EmptyClassError(
                f"class {name!r} has no decodable images"
            )
        all_images.extend(images)
        labels.extend([c] * len(images))
        splits.extend(_split_tags(paths, root, job))

    image_feats = l2_normalize_rows(backend.embed_images(all_images))

    # one embedding per (template, class), averaged over templates and
    # renormalized -- the usual prompt-ensemble recipe
    per_template = []
    for t in job.templates:
        prompts = [t.replace(PLACEHOLDER, name) for name in classes]
        per_template.append(l2_normalize_rows(backend.embed_texts(prompts)))
    text_feats = l2_normalize_rows(np.mean(per_template, axis=0))

    out = Path(job.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_cmf1(out / "images.cmf1", image_feats)
    write_cmf1(out / "text.cmf1", text_feats)
    manifest_path = out / "manifest.json"
    write_manifest(manifest_path, classes, "images.cmf1", "text.cmf1",
                   [(i, l, s) for i, (l, s) in enumerate(zip(labels, splits))])
    return ExportResult(manifest_path=manifest_path,
                        num_images=len(all_images),
                        num_classes=len(classes),
                        skipped=tuple(skipped))
