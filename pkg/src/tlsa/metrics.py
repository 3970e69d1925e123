"""Scoring: harmonic accuracy over common/private splits, cluster agreement
for the private side, and the combined three-way score.

Common-class accuracy is per-class by default (mean of per-class accuracies
over the ground-truth common classes) with a per-instance option. Private
accuracy is the fraction of ground-truth private samples emitted as unknown.
When the evaluation set has no private samples, h_score and h3_score carry
the common-class accuracy instead (the substitution rule for closed/partial
splits).
"""
from __future__ import annotations

import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, asdict
from typing import Optional

from .corpus import SplitConfig, normalize_label
from .errors import EmptyEval, MalformedLine, MissingTruth, NoPrivateSamples

log = logging.getLogger(__name__)


def h_score(a_common: float, a_private: float) -> float:
    """Harmonic mean of the two accuracies; zero if either side is zero."""
    if a_common <= 0.0 or a_private <= 0.0:
        return 0.0
    return 2.0 * a_common * a_private / (a_common + a_private)


def h3_score(a_common: float, a_private: float, nmi_value: float) -> float:
    """Three-way harmonic mean; zero if any component is zero."""
    if a_common <= 0.0 or a_private <= 0.0 or nmi_value <= 0.0:
        return 0.0
    return 3.0 / (1.0 / a_common + 1.0 / a_private + 1.0 / nmi_value)


def nmi(pred_clusters: list, true_classes: list) -> float:
    """Mutual information normalized by the arithmetic mean of the entropies,
    natural logs.

    Two identical single-cluster partitions score 1.0; a zero-entropy
    partition against a differing one scores 0.0.
    """
    if len(pred_clusters) != len(true_classes):
        raise ValueError("partitions must have equal length")
    n = len(pred_clusters)
    if n == 0:
        raise NoPrivateSamples("cannot score empty partitions")
    count_a = Counter(pred_clusters)
    count_b = Counter(true_classes)
    if len(count_a) == 1 and len(count_b) == 1:
        return 1.0
    joint: Counter = Counter(zip(pred_clusters, true_classes))
    mi = 0.0
    for (a, b), n_ab in joint.items():
        mi += (n_ab / n) * math.log(n * n_ab / (count_a[a] * count_b[b]))
    ent_a = -sum((c / n) * math.log(c / n) for c in count_a.values())
    ent_b = -sum((c / n) * math.log(c / n) for c in count_b.values())
    denom = 0.5 * (ent_a + ent_b)
    if denom <= 0.0:
        return 0.0
    return min(1.0, max(0.0, mi / denom))


@dataclass
class PredictionRecord:
    sample_id: str
    class_index: int
    label: str
    is_unknown: bool


@dataclass
class TruthRecord:
    sample_id: str
    true_label: str
    is_private: bool


def load_predictions(path) -> list[PredictionRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                records.append(
                    PredictionRecord(
                        str(obj["sample_id"]),
                        int(obj["class_index"]),
                        str(obj["label"]),
                        bool(obj["is_unknown"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MalformedLine(f"{path}:{lineno}: bad prediction record: {exc}")
    return records


def load_truth(path) -> dict[str, TruthRecord]:
    """Truth manifest keyed by sample id; labels are normalized on load."""
    records: dict[str, TruthRecord] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rec = TruthRecord(
                    str(obj["sample_id"]),
                    normalize_label(str(obj["true_label"])),
                    bool(obj["is_private"]),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MalformedLine(f"{path}:{lineno}: bad truth record: {exc}")
            if rec.sample_id in records:
                raise MalformedLine(f"{path}:{lineno}: duplicate sample id {rec.sample_id!r}")
            records[rec.sample_id] = rec
    return records


@dataclass
class EvalResult:
    acc_common: float
    acc_private: Optional[float]  # None on splits with no private samples
    nmi: Optional[float]
    h_score: float  # carries acc_common when no private samples exist
    h3_score: Optional[float]
    per_class: dict[str, float]  # per-common-class accuracy breakdown
    mode: str  # "h" when private samples exist, else "accuracy"
    n_total: int
    n_common: int
    n_private: int

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


def evaluate(
    predictions: list[PredictionRecord],
    truth: dict[str, TruthRecord],
    split: Optional[SplitConfig] = None,
    per_class: bool = True,
) -> EvalResult:
    """Score predictions against the truth manifest.

    Every prediction must have a truth row. Cluster agreement is computed
    over ground-truth private samples emitted as unknown, using the emitted
    label as the cluster assignment; if no such samples exist it is 0.0.
    Whether private samples exist is read from the data; a `split` that
    disagrees only triggers a warning.
    """
    if not predictions:
        raise EmptyEval("no predictions to evaluate")
    hits: dict[str, int] = defaultdict(int)
    seen: dict[str, int] = defaultdict(int)
    hit_total = 0
    private_total = 0
    private_unknown = 0
    cluster_pred: list[str] = []
    cluster_true: list[str] = []
    for rec in predictions:
        t = truth.get(rec.sample_id)
        if t is None:
            raise MissingTruth(f"no truth row for sample {rec.sample_id!r}")
        if t.is_private:
            private_total += 1
            if rec.is_unknown:
                private_unknown += 1
                cluster_pred.append(rec.label)
                cluster_true.append(t.true_label)
        else:
            seen[t.true_label] += 1
            hit = (not rec.is_unknown) and rec.label == t.true_label
            hits[t.true_label] += int(hit)
            hit_total += int(hit)

    n_common = sum(seen.values())
    if n_common == 0 and private_total == 0:
        raise EmptyEval("evaluation set has neither common nor private samples")
    if split is not None and split.has_private != (private_total > 0):
        log.warning(
            "split says has_private=%s but data has %d private samples",
            split.has_private,
            private_total,
        )

    breakdown = {c: hits[c] / seen[c] for c in sorted(seen)}
    if n_common == 0:
        acc_common = 0.0
    elif per_class:
        acc_common = sum(breakdown.values()) / len(breakdown)
    else:
        acc_common = hit_total / n_common

    if private_total == 0:
        return EvalResult(
            acc_common=acc_common,
            acc_private=None,
            nmi=None,
            h_score=acc_common,
            h3_score=acc_common,
            per_class=breakdown,
            mode="accuracy",
            n_total=len(predictions),
            n_common=n_common,
            n_private=0,
        )

    acc_private = private_unknown / private_total
    nmi_value = nmi(cluster_pred, cluster_true) if cluster_pred else 0.0
    return EvalResult(
        acc_common=acc_common,
        acc_private=acc_private,
        nmi=nmi_value,
        h_score=h_score(acc_common, acc_private),
        h3_score=h3_score(acc_common, acc_private, nmi_value),
        per_class=breakdown,
        mode="h",
        n_total=len(predictions),
        n_common=n_common,
        n_private=private_total,
    )
