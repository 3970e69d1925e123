"""Export operations: walk an image folder, run the configured backends,
and emit the embedding / caption artifacts the alignment engine loads.

Error policy per artifact:
  - image embeddings: an unreadable image is skipped with a warning; an
    empty (or fully unreadable) dataset is an error
  - captions: an unreadable image still gets a line, with empty responses,
    so caption rows stay joinable against whatever did embed
  - label embeddings: an empty label list is an error

All scans are recursive, sorted by relative POSIX path, and use that
relative path as the sample id, so re-exports are order-stable.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from . import backends, formats
from .errors import EmptyDataset, ExportError, ManifestError
from .manifest import ExportManifest

log = logging.getLogger("tlsa_export")

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp", ".tif", ".tiff")
BATCH_SIZE = 32


def _require_out(manifest: ExportManifest, field: str) -> Path:
    value = getattr(manifest, f"out_{field}")
    if value is None:
        raise ManifestError(f"manifest has no [outputs] {field} path")
    return Path(value)


def dataset_dir(manifest: ExportManifest) -> Path:
    if manifest.dataset_root is None:
        raise ManifestError("manifest has no [dataset] root")
    root = Path(manifest.dataset_root)
    if manifest.domain:
        root = root / manifest.domain
    if not root.is_dir():
        raise ExportError(f"dataset directory not found: {root}")
    return root


def scan_images(root: Path) -> list[tuple[str, Path]]:
    """(relative posix id, absolute path) pairs, sorted by id."""
    pairs = [
        (p.relative_to(root).as_posix(), p)
        for p in root.rglob("*")
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    ]
    return sorted(pairs)


def _open_rgb(path: Path) -> Image.Image:
    with Image.open(path) as img:
        return img.convert("RGB")


def export_image_embeddings(
    manifest: ExportManifest, embedder: Optional[backends.ImageEmbedder] = None
) -> Path:
    out = _require_out(manifest, "image_embeddings")
    embedder = embedder or backends.image_embedder_for(manifest)
    pairs = scan_images(dataset_dir(manifest))
    if not pairs:
        raise EmptyDataset(f"no images under {dataset_dir(manifest)}")

    ids: list[str] = []
    rows: list[np.ndarray] = []
    batch_ids: list[str] = []
    batch_imgs: list[Image.Image] = []

    def flush() -> None:
        if not batch_imgs:
            return
        emb = embedder.embed_images(batch_imgs)
        for sid, row in zip(batch_ids, emb):
            ids.append(sid)
            rows.append(row)
        batch_ids.clear()
        batch_imgs.clear()

    for sid, path in pairs:
        try:
            img = _open_rgb(path)
        except OSError as exc:
            log.warning("skipping unreadable image %s: %s", sid, exc)
            continue
        batch_ids.append(sid)
        batch_imgs.append(img)
        if len(batch_imgs) >= BATCH_SIZE:
            flush()
    flush()

    if not ids:
        raise EmptyDataset(f"no readable images under {dataset_dir(manifest)}")
    formats.write_emb1(ids, np.stack(rows), out)
    return out


def export_label_embeddings(
    manifest: ExportManifest, embedder: Optional[backends.TextEmbedder] = None
) -> Path:
    out = _require_out(manifest, "label_embeddings")
    if manifest.labels_file is None:
        raise ManifestError("manifest has no [labels] file to embed")
    labels = formats.read_label_file(manifest.labels_file)
    if not labels:
        raise EmptyDataset(f"no labels in {manifest.labels_file}")
    embedder = embedder or backends.text_embedder_for(manifest)
    texts = [manifest.label_template.format(label=lab) for lab in labels]
    rows = embedder.embed_texts(texts)
    formats.write_emb1(labels, rows, out)
    return out


def export_captions(
    manifest: ExportManifest, captioner: Optional[backends.Captioner] = None
) -> Path:
    out = _require_out(manifest, "captions")
    captioner = captioner or backends.captioner_for(manifest)
    pairs = scan_images(dataset_dir(manifest))
    if not pairs:
        raise EmptyDataset(f"no images under {dataset_dir(manifest)}")

    records: list[tuple[str, list[str]]] = []
    for sid, path in pairs:
        try:
            img = _open_rgb(path)
            answers = captioner.answer(img, sid, manifest.prompts)
        except OSError as exc:
            log.warning("empty responses for unreadable image %s: %s", sid, exc)
            answers = []
        records.append((sid, answers))
    formats.write_captions(records, out)
    return out
