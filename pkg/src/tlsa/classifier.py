"""Universal zero-shot classifier over the source labels extended with the
predicted target-private labels, with the threshold-free unknown mapping:
any private argmax collapses to the single class index n_source."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .corpus import EmbeddingTable, normalize_rows
from .errors import DimMismatch, LabelCollision

DEFAULT_TEMPERATURE = 0.01  # CLIP-style logit scale 100


@dataclass
class UniversalClassifier:
    label_order: list[str]
    weights: np.ndarray  # (C, d) float32, unit rows
    n_source: int

    @property
    def n_labels(self) -> int:
        return len(self.label_order)

    @property
    def dim(self) -> int:
        return int(self.weights.shape[1])


def build(
    source_emb: EmbeddingTable, private_emb: Optional[EmbeddingTable] = None
) -> UniversalClassifier:
    """Concatenate source and private label embeddings, order-preserving."""
    if private_emb is None:
        private_emb = EmbeddingTable([], np.zeros((0, source_emb.dim), dtype=np.float32))
    if len(private_emb) and source_emb.dim != private_emb.dim:
        raise DimMismatch(f"source dim {source_emb.dim} != private dim {private_emb.dim}")
    clash = set(source_emb.ids) & set(private_emb.ids)
    if clash:
        raise LabelCollision(f"labels in both sets: {sorted(clash)}")
    if not source_emb.normalized:
        source_emb = normalize_rows(source_emb)
    if len(private_emb) and not private_emb.normalized:
        private_emb = normalize_rows(private_emb)
    if len(private_emb):
        weights = np.concatenate([source_emb.rows, private_emb.rows], axis=0)
    else:
        weights = source_emb.rows.copy()
    return UniversalClassifier(
        list(source_emb.ids) + list(private_emb.ids), weights, len(source_emb)
    )


def scores_batch(clf: UniversalClassifier, images: np.ndarray) -> np.ndarray:
    if images.shape[-1] != clf.dim:
        raise DimMismatch(f"image dim {images.shape[-1]} != classifier dim {clf.dim}")
    return images @ clf.weights.T


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def predict(
    clf: UniversalClassifier, image: np.ndarray, temperature: float = DEFAULT_TEMPERATURE
) -> tuple[int, np.ndarray]:
    """Emitted class in 0..n_source plus the softmax over the full label order.

    The argmax runs over every label; a private winner is emitted as the
    single unknown class n_source. Temperature only shapes the softmax,
    never the argmax.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    s = scores_batch(clf, np.asarray(image, dtype=np.float32))
    raw = int(np.argmax(s))  # ties -> smallest index
    probs = softmax(s.astype(np.float64) / temperature)
    emitted = raw if raw < clf.n_source else clf.n_source
    return emitted, probs


def predict_batch(
    clf: UniversalClassifier, images: np.ndarray, temperature: float = DEFAULT_TEMPERATURE
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized predict: (emitted classes, raw argmax indices, softmax matrix)."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    s = scores_batch(clf, np.asarray(images, dtype=np.float32))
    raw = np.argmax(s, axis=1)
    probs = softmax(s.astype(np.float64) / temperature, axis=1)
    emitted = np.where(raw < clf.n_source, raw, clf.n_source)
    return emitted, raw, probs
