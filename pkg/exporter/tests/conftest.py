"""Shared fixtures: a tiny on-disk image dataset plus a manifest writer.

The smoke dataset is ten 8x8 PNGs across three filename classes, with one
image nested in a subdirectory so recursive scanning and POSIX ids get
exercised. Every image has a distinct fill color, so the hash-seeded stub
embedder yields distinct vectors.
"""
from __future__ import annotations

from pathlib import Path

import pytest
from PIL import Image

CLASSES = [("cat", 4), ("dog", 3), ("fire_truck", 3)]


def make_smoke_dataset(root: Path) -> list[str]:
    """Write the ten-image dataset; returns the sorted relative ids."""
    ids = []
    shade = 30
    for label, count in CLASSES:
        for i in range(1, count + 1):
            rel = f"{label}_{i:02d}.png"
            if label == "cat" and i == count:
                rel = f"extra/{rel}"  # one nested image
            path = root / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            Image.new("RGB", (8, 8), (shade, (shade * 3) % 256, 255 - shade)).save(path)
            ids.append(rel)
            shade += 17
    return sorted(ids)


def manifest_text(dataset: Path, out: Path, extra: str = "", domain: str = "") -> str:
    domain_line = f'domain = "{domain}"\n' if domain else ""
    return (
        "[dataset]\n"
        f'root = "{dataset}"\n'
        + domain_line
        + "\n[models]\n"
        'image_backend = "fake"\n'
        'caption_backend = "fake"\n'
        "\n[outputs]\n"
        f'image_embeddings = "{out}/images.emb1"\n'
        f'label_embeddings = "{out}/labels.emb1"\n'
        f'captions = "{out}/captions.jsonl"\n'
        f'synonyms = "{out}/synonyms.syn"\n'
        + extra
    )


@pytest.fixture(scope="session")
def smoke_root(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("smoke_dataset")
    make_smoke_dataset(root)
    return root


@pytest.fixture()
def manifest_for(tmp_path):
    """Factory: write a manifest TOML for a dataset and return its path."""

    def build(dataset: Path, extra: str = "", domain: str = "") -> Path:
        out = tmp_path / "out"
        path = tmp_path / "export.toml"
        path.write_text(manifest_text(dataset, out, extra, domain), encoding="utf-8")
        return path

    return build
