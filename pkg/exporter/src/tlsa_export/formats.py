"""Writers for the artifact files the alignment engine consumes.

EMB1 layout: magic "EMB1", then a little-endian header (u32 version=1,
u32 dim, u64 count, u8 normalized flag), then per row a u16 id byte
length, the UTF-8 id, and dim float32 values. Captions are JSONL rows
{"sample_id", "responses": [{"prompt": index, "answer": text}]}. SYN is
one synonym group per line, lemmas joined by '|', underscores standing
for spaces. All writes are atomic (temp file plus rename).
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ExportError

EMB1_MAGIC = b"EMB1"
EMB1_VERSION = 1


def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_emb1(ids: list[str], rows: np.ndarray, path, normalized: bool = True) -> None:
    """Serialize one embedding table; rows are cast to little-endian float32."""
    rows = np.ascontiguousarray(rows, dtype="<f4")
    if rows.ndim != 2 or rows.shape[0] != len(ids):
        raise ExportError(f"{len(ids)} ids but row block of shape {rows.shape}")
    parts = [
        EMB1_MAGIC,
        struct.pack("<IIQB", EMB1_VERSION, rows.shape[1], len(ids), int(normalized)),
    ]
    for id_, row in zip(ids, rows):
        raw = id_.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ExportError(f"id too long for EMB1: {id_[:40]!r}...")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(row.tobytes())
    atomic_write_bytes(path, b"".join(parts))


def write_captions(records: Iterable[tuple[str, list[str]]], path) -> None:
    """One JSONL row per sample; answer i is paired with prompt index i."""
    lines = []
    for sample_id, answers in records:
        lines.append(
            json.dumps(
                {
                    "sample_id": sample_id,
                    "responses": [
                        {"prompt": i, "answer": a} for i, a in enumerate(answers)
                    ],
                },
                sort_keys=True,
            )
        )
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def write_syn(groups: Iterable[Iterable[str]], path) -> None:
    """One pipe-joined synonym group per line."""
    lines = ["|".join(group) for group in groups]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_label_file(path) -> list[str]:
    """Plain one-label-per-line text; blank lines and '#' comments skipped."""
    labels = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            body = line.split("#", 1)[0].strip()
            if body:
                labels.append(body)
    return labels
