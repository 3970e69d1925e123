"""Inference backends: transformer models for real exports plus a
deterministic stub for offline runs and tests.

The stub derives every embedding from a content hash, so re-exporting the
same inputs is byte-identical and nothing needs model weights. Answer text
for the stub captioner comes from an explicit answers map when provided,
falling back to the image's filename stem with trailing counters stripped
("cat_003" answers "cat").
"""
from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path
from typing import Optional, Protocol

import numpy as np
from PIL import Image

from .errors import ModelUnavailable
from .manifest import ExportManifest


class ImageEmbedder(Protocol):
    def embed_images(self, images: list[Image.Image]) -> np.ndarray: ...


class TextEmbedder(Protocol):
    def embed_texts(self, texts: list[str]) -> np.ndarray: ...


class Captioner(Protocol):
    def answer(self, image: Image.Image, sample_id: str, prompts: list[str]) -> list[str]: ...


def _unit(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return rows.astype(np.float32)


def _hash_seed(*parts: bytes) -> int:
    digest = hashlib.sha256(b"\x00".join(parts)).digest()
    return int.from_bytes(digest[:8], "little")


class FakeEmbedder:
    """Content-hash-seeded Gaussian directions; unit rows, fixed dim."""

    def __init__(self, dim: int) -> None:
        self.dim = dim

    def _vector(self, seed: int) -> np.ndarray:
        return np.random.default_rng(seed).standard_normal(self.dim)

    def embed_images(self, images: list[Image.Image]) -> np.ndarray:
        rows = [
            self._vector(
                _hash_seed(b"image", img.mode.encode(), str(img.size).encode(), img.tobytes())
            )
            for img in images
        ]
        return _unit(np.stack(rows))

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        rows = [self._vector(_hash_seed(b"text", t.encode("utf-8"))) for t in texts]
        return _unit(np.stack(rows))


_TRAILING_COUNTER = re.compile(r"[\s_\-]*\d+$")


def stem_answer(sample_id: str) -> str:
    """Filename stem with extension and trailing counters removed."""
    stem = Path(sample_id).stem
    stripped = _TRAILING_COUNTER.sub("", stem).replace("_", " ").strip()
    return stripped or stem


class FakeCaptioner:
    """Answers every prompt with the sample's known label."""

    def __init__(self, answers: Optional[dict[str, str]] = None) -> None:
        self.answers = answers or {}

    @classmethod
    def from_file(cls, path) -> "FakeCaptioner":
        with open(path, "r", encoding="utf-8") as f:
            return cls({str(k): str(v) for k, v in json.load(f).items()})

    def answer(self, image: Image.Image, sample_id: str, prompts: list[str]) -> list[str]:
        label = self.answers.get(sample_id) or stem_answer(sample_id)
        return [label for _ in prompts]


class ClipBackend:  # pragma: no cover - needs downloaded weights
    """Frozen dual-encoder embedder for both images and label texts."""

    def __init__(self, model_id: str) -> None:
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ModelUnavailable(f"transformers/torch not installed: {exc}")
        try:
            self.model = CLIPModel.from_pretrained(model_id).eval()
            self.processor = CLIPProcessor.from_pretrained(model_id)
        except Exception as exc:
            raise ModelUnavailable(f"cannot load {model_id!r}: {exc}")
        self.torch = torch

    def embed_images(self, images: list[Image.Image]) -> np.ndarray:
        inputs = self.processor(images=images, return_tensors="pt")
        with self.torch.no_grad():
            feats = self.model.get_image_features(**inputs)
        return _unit(feats.cpu().numpy())

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        inputs = self.processor(text=texts, return_tensors="pt", padding=True, truncation=True)
        with self.torch.no_grad():
            feats = self.model.get_text_features(**inputs)
        return _unit(feats.cpu().numpy())


class BlipCaptioner:  # pragma: no cover - needs downloaded weights
    """Visual question answering over the configured prompt list."""

    def __init__(self, model_id: str) -> None:
        try:
            import torch
            from transformers import BlipForQuestionAnswering, BlipProcessor
        except ImportError as exc:
            raise ModelUnavailable(f"transformers/torch not installed: {exc}")
        try:
            self.model = BlipForQuestionAnswering.from_pretrained(model_id).eval()
            self.processor = BlipProcessor.from_pretrained(model_id)
        except Exception as exc:
            raise ModelUnavailable(f"cannot load {model_id!r}: {exc}")
        self.torch = torch

    def answer(self, image: Image.Image, sample_id: str, prompts: list[str]) -> list[str]:
        out = []
        for prompt in prompts:
            inputs = self.processor(image, prompt, return_tensors="pt")
            with self.torch.no_grad():
                ids = self.model.generate(**inputs, max_new_tokens=10)
            out.append(self.processor.decode(ids[0], skip_special_tokens=True).strip())
        return out


def image_embedder_for(m: ExportManifest) -> ImageEmbedder:
    if m.image_backend == "fake":
        return FakeEmbedder(m.fake_dim)
    if m.image_backend == "clip":
        return ClipBackend(m.clip_model)  # pragma: no cover
    raise ModelUnavailable(f"backend {m.image_backend!r} cannot embed images")


def text_embedder_for(m: ExportManifest) -> TextEmbedder:
    if m.image_backend == "fake":
        return FakeEmbedder(m.fake_dim)
    if m.image_backend == "clip":
        return ClipBackend(m.clip_model)  # pragma: no cover
    raise ModelUnavailable(f"backend {m.image_backend!r} cannot embed texts")


def captioner_for(m: ExportManifest) -> Captioner:
    if m.caption_backend == "fake":
        if m.fake_answers is not None:
            return FakeCaptioner.from_file(m.fake_answers)
        return FakeCaptioner()
    if m.caption_backend == "blip":
        return BlipCaptioner(m.blip_model)  # pragma: no cover
    raise ModelUnavailable(f"backend {m.caption_backend!r} cannot answer prompts")
