"""Step 2 semantic label alignment: score target images against the
augmented label space [C_s ++ R-filtered], form adaptive per-sample
prediction sets, decide shared vs. target-private, and accumulate the
frequency bank.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .corpus import DiscoveredLabelRecord, EmbeddingTable, LabelSet, normalize_label
from .errors import ConfigError, DimMismatch, TooFewScores

log = logging.getLogger(__name__)

THRESHOLD_MODES = {"min": _kernels.MODE_MIN, "gap": _kernels.MODE_GAP, "avg": _kernels.MODE_AVG}


@dataclass
class SimilarityMatrix:
    """Cosine scores of every sample against the augmented label order."""

    sample_ids: list[str]
    label_order: list[str]
    scores: np.ndarray  # (N, |C_s|+|R~|) float32

    def __post_init__(self) -> None:
        if self.scores.shape != (len(self.sample_ids), len(self.label_order)):
            raise DimMismatch(
                f"scores shape {self.scores.shape} does not match "
                f"{len(self.sample_ids)} samples x {len(self.label_order)} labels"
            )


@dataclass
class PredictionSet:
    """Adaptively thresholded plausible labels for one sample (entries sorted by score)."""

    sample_id: str
    entries: list[tuple[str, float]]
    tau_gap: float
    tau_avg: float
    tau_set: float

    def labels(self) -> list[str]:
        return [lab for lab, _ in self.entries]


@dataclass
class FrequencyBank:
    """Occurrence counts of banked labels; each banked sample contributes one."""

    counts: dict[str, int] = field(default_factory=dict)

    def add(self, label: str) -> None:
        self.counts[label] = self.counts.get(label, 0) + 1

    def merge(self, other: "FrequencyBank") -> None:
        for lab, n in other.counts.items():
            self.counts[lab] = self.counts.get(lab, 0) + n

    def total(self) -> int:
        return sum(self.counts.values())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.counts, f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "FrequencyBank":
        with open(path, "r", encoding="utf-8") as f:
            counts = json.load(f)
        return cls({str(k): int(v) for k, v in counts.items()})


def score(images: EmbeddingTable, labels: EmbeddingTable) -> SimilarityMatrix:
    """Dense cosine similarity (plain dot product of unit rows)."""
    if images.dim != labels.dim:
        raise DimMismatch(f"image dim {images.dim} != label dim {labels.dim}")
    if not (images.normalized and labels.normalized):
        raise ConfigError("score requires unit-normalized tables")
    s = images.rows @ labels.rows.T
    return SimilarityMatrix(list(images.ids), list(labels.ids), s)


def gap_threshold(topk_scores) -> tuple[int, float]:
    """Largest consecutive gap in a descending top-k list: returns (J, score[J])."""
    s = [float(v) for v in topk_scores]
    if len(s) < 2:
        raise TooFewScores(f"gap threshold needs k >= 2, got {len(s)}")
    best_gap = -np.inf
    j_gap = 1
    for j in range(1, len(s)):
        g = s[j - 1] - s[j]
        if g > best_gap:
            best_gap = g
            j_gap = j
    return j_gap, s[j_gap]


def avg_threshold(topk_scores) -> float:
    """Arithmetic mean of the top-k scores (sequential float64 accumulation)."""
    s = [float(v) for v in topk_scores]
    if not s:
        raise TooFewScores("avg threshold needs a nonempty score list")
    acc = 0.0
    for v in s:
        acc += v
    return acc / len(s)


def build_prediction_set(
    row,
    label_order: list[str],
    k: int,
    sample_id: str = "",
    mode: str = "min",
) -> PredictionSet:
    """Top-k entries of one similarity row surviving the adaptive threshold.

    tau_set = min(tau_gap, tau_avg) by default; membership is strict (score >
    tau_set), so the label sitting exactly at tau_gap is excluded. When all k
    scores are equal the set degenerates to the top-1 entry alone.
    """
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or len(row) != len(label_order):
        raise DimMismatch("row length does not match label_order")
    if k < 2:
        raise TooFewScores(f"k must be >= 2, got {k}")
    if k > len(row):
        raise TooFewScores(f"k={k} exceeds row length {len(row)}")
    topk_idx, topk, _, tau_gap, tau_avg, tau_set, keep, _ = _kernels.analyze_rows_numpy(
        row[None, :], k, 0, THRESHOLD_MODES[mode]
    )
    entries = [
        (label_order[int(topk_idx[0, j])], float(topk[0, j]))
        for j in range(k)
        if keep[0, j]
    ]
    return PredictionSet(sample_id, entries, float(tau_gap[0]), float(tau_avg[0]), float(tau_set[0]))


@dataclass
class Verdict:
    """Shared (bank the overall top-1 prediction) or private (bank the discovered label)."""

    is_shared: bool
    banked_label: Optional[str]

    @property
    def kind(self) -> str:
        return "shared" if self.is_shared else "private"


def classify_sample(
    pred_set: PredictionSet, source: LabelSet, r_i: Optional[str]
) -> Verdict:
    """Source-label presence check over the prediction set.

    Any source label in the set makes the sample shared and banks its
    highest-scoring prediction; otherwise the sample is target-private and
    banks r_i (even when r_i is not in the set). A private verdict with no
    r_i banks nothing.
    """
    src = set(source.labels)
    if any(lab in src for lab in pred_set.labels()):
        top1 = max(pred_set.entries, key=lambda e: e[1])
        return Verdict(True, top1[0])
    return Verdict(False, r_i)


@dataclass
class AlignmentResult:
    bank: FrequencyBank
    audit: list[dict]

    def write_audit(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for row in self.audit:
                f.write(json.dumps(row, sort_keys=True) + "\n")


def run_alignment(
    images: EmbeddingTable,
    labels: EmbeddingTable,
    source: LabelSet,
    discovered_records: list[DiscoveredLabelRecord],
    k: int = 5,
    batch_size: int = 128,
    mode: str = "min",
) -> AlignmentResult:
    """One full pass of semantic alignment over the target set.

    `labels` must hold the source labels first, in source order, followed by
    the filtered discovered labels. The similarity matrix is computed once;
    batching applies only to the per-row kernel, so results are independent
    of the partition.
    """
    if mode not in THRESHOLD_MODES:
        raise ConfigError(f"unknown threshold mode {mode!r}")
    if batch_size < 1:
        raise ConfigError("batch_size must be positive")
    n_source = len(source)
    if labels.ids[:n_source] != source.labels:
        raise ConfigError("label table must start with the source labels in order")

    sim = score(images, labels)
    n, c = sim.scores.shape
    if c < 2:
        raise TooFewScores(f"need at least 2 labels to threshold, got {c}")
    k_eff = min(k, c)
    if k_eff < 2:
        raise TooFewScores(f"k must be >= 2, got {k}")
    if k_eff < k:
        log.warning("k=%d clamped to %d (only %d labels)", k, k_eff, c)

    r_map = {
        rec.sample_id: normalize_label(rec.voted_label)
        for rec in discovered_records
        if rec.voted_label
    }
    mode_code = THRESHOLD_MODES[mode]
    bank = FrequencyBank()
    audit: list[dict] = []
    scores64 = sim.scores.astype(np.float64)

    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        topk_idx, topk, _, tau_gap, tau_avg, tau_set, keep, has_source = _kernels.analyze_rows(
            scores64[start:stop], k_eff, n_source, mode_code
        )
        for bi in range(stop - start):
            i = start + bi
            sid = sim.sample_ids[i]
            if has_source[bi]:
                banked = sim.label_order[int(topk_idx[bi, 0])]
                verdict = "shared"
            else:
                banked = r_map.get(sid)
                verdict = "private"
                if banked is None:
                    log.warning("sample %s: private verdict with no discovered label; skipped", sid)
            if banked is not None:
                bank.add(banked)
            audit.append(
                {
                    "sample_id": sid,
                    "topk": [
                        [sim.label_order[int(topk_idx[bi, j])], float(topk[bi, j])]
                        for j in range(k_eff)
                    ],
                    "tau_gap": float(tau_gap[bi]),
                    "tau_avg": float(tau_avg[bi]),
                    "tau_set": float(tau_set[bi]),
                    "verdict": verdict,
                    "banked_label": banked,
                }
            )
    return AlignmentResult(bank, audit)
