"""Data model, file formats, and majority-vote label discovery.

Owns the EMB1 embedding container, the captions JSONL schema, plain-text
label sets, and the voting step that turns raw VQA answers into one
discovered label per sample.
"""
from __future__ import annotations

import json
import struct
import unicodedata
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    DuplicateId,
    MalformedHeader,
    NonFiniteValue,
    ZeroNormRow,
)

EMB1_MAGIC = b"EMB1"
EMB1_VERSION = 1

_ARTICLES = ("a", "an", "the")


def normalize_label(text: str) -> str:
    """Canonical label form: NFC, lowercase, collapsed whitespace, no leading article."""
    parts = unicodedata.normalize("NFC", text).lower().split()
    while parts and parts[0] in _ARTICLES:
        parts = parts[1:]
    return " ".join(parts)


@dataclass
class EmbeddingTable:
    """Float32 vectors keyed by unique string IDs, optionally unit-normalized."""

    ids: list[str]
    rows: np.ndarray  # (N, dim) float32
    normalized: bool = False

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def __post_init__(self) -> None:
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float32)
        if self.rows.ndim != 2:
            raise DimensionMismatch(f"rows must be 2-D, got shape {self.rows.shape}")
        if self.rows.shape[1] < 1:
            raise DimensionMismatch("dim must be positive")
        self.validate()

    def validate(self) -> None:
        if len(self.ids) != self.rows.shape[0]:
            raise DimensionMismatch(
                f"{len(self.ids)} ids but {self.rows.shape[0]} rows"
            )
        seen = set()
        for i in self.ids:
            if i in seen:
                raise DuplicateId(f"duplicate id {i!r}")
            seen.add(i)
        if not np.all(np.isfinite(self.rows)):
            raise NonFiniteValue("embedding table contains NaN or Inf")
        if self.normalized and len(self) > 0:
            norms = np.linalg.norm(self.rows.astype(np.float64), axis=1)
            if np.max(np.abs(norms - 1.0)) > 1e-4:
                raise MalformedHeader("normalized flag set but rows are not unit norm")

    def index_of(self, id_: str) -> int:
        try:
            return self.ids.index(id_)
        except ValueError:
            raise KeyError(id_) from None

    def subset(self, ids: Iterable[str]) -> "EmbeddingTable":
        """Rows for the given ids, in the given order. KeyError on a missing id."""
        pos = {s: i for i, s in enumerate(self.ids)}
        wanted = list(ids)
        idx = [pos[s] for s in wanted]
        return EmbeddingTable(wanted, self.rows[idx].copy(), normalized=self.normalized)


def normalize_rows(table: EmbeddingTable) -> EmbeddingTable:
    """Scale every row to unit L2 norm. Raises ZeroNormRow on a degenerate row."""
    norms = np.linalg.norm(table.rows.astype(np.float64), axis=1)
    bad = np.nonzero(norms <= 1e-12)[0]
    if bad.size:
        raise ZeroNormRow(f"row {table.ids[int(bad[0])]!r} has zero norm")
    rows = (table.rows.astype(np.float64) / norms[:, None]).astype(np.float32)
    return EmbeddingTable(list(table.ids), rows, normalized=True)


def write_embeddings(table: EmbeddingTable, path) -> None:
    """Serialize to the EMB1 container (little-endian, bit-exact float32)."""
    with open(path, "wb") as f:
        f.write(EMB1_MAGIC)
        f.write(struct.pack("<IIQB", EMB1_VERSION, table.dim, len(table), int(table.normalized)))
        for id_, row in zip(table.ids, table.rows):
            raw = id_.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ConfigError(f"id too long for EMB1: {id_[:40]!r}...")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(row.tobytes())


def load_embeddings(path) -> EmbeddingTable:
    """Read an EMB1 container, validating header, dimensions, ids, and finiteness."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != EMB1_MAGIC:
            raise MalformedHeader(f"bad magic {magic!r}")
        header = f.read(struct.calcsize("<IIQB"))
        if len(header) != struct.calcsize("<IIQB"):
            raise MalformedHeader("truncated header")
        version, dim, count, norm_flag = struct.unpack("<IIQB", header)
        if version != EMB1_VERSION:
            raise MalformedHeader(f"unsupported version {version}")
        if dim < 1:
            raise MalformedHeader("dim must be positive")
        ids: list[str] = []
        rows = np.empty((count, dim), dtype=np.float32)
        row_bytes = dim * 4
        for n in range(count):
            lenraw = f.read(2)
            if len(lenraw) != 2:
                raise DimensionMismatch(f"truncated record {n}")
            (idlen,) = struct.unpack("<H", lenraw)
            idraw = f.read(idlen)
            if len(idraw) != idlen:
                raise DimensionMismatch(f"truncated id in record {n}")
            raw = f.read(row_bytes)
            if len(raw) != row_bytes:
                raise DimensionMismatch(
                    f"record {n}: expected {dim} floats, got {len(raw) // 4}"
                )
            ids.append(idraw.decode("utf-8"))
            rows[n] = np.frombuffer(raw, dtype="<f4")
        if f.read(1):
            raise DimensionMismatch("trailing bytes after last record")
    return EmbeddingTable(ids, rows, normalized=bool(norm_flag))


LABELSET_KINDS = ("source", "discovered", "private-candidate", "private-predicted")


@dataclass
class LabelSet:
    """Ordered, deduplicated set of normalized labels."""

    labels: list[str]
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in LABELSET_KINDS:
            raise ConfigError(f"unknown label-set kind {self.kind!r}")
        normed = []
        seen = set()
        for lab in self.labels:
            n = normalize_label(lab)
            if not n:
                raise ConfigError(f"label {lab!r} normalizes to empty string")
            if n not in seen:
                seen.add(n)
                normed.append(n)
        self.labels = normed

    def __contains__(self, label: str) -> bool:
        return label in set(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def index(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}


def load_label_file(path, kind: str) -> LabelSet:
    """One label per line, '#' lines and blanks skipped."""
    labels = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                labels.append(line)
    return LabelSet(labels, kind)


def write_label_file(labels: Iterable[str], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for lab in labels:
            f.write(lab + "\n")


@dataclass
class DiscoveredLabelRecord:
    """Raw VQA responses for one sample plus the majority-voted label."""

    sample_id: str
    responses: list[tuple[int, str]] = field(default_factory=list)
    voted_label: Optional[str] = None


def load_captions(path, max_prompts: int = 5) -> list[DiscoveredLabelRecord]:
    """Parse the captions JSONL: {"sample_id": ..., "responses": [{"prompt", "answer"}]}."""
    records = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                sid = obj["sample_id"]
                resp = [(int(r["prompt"]), str(r["answer"])) for r in obj["responses"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ConfigError(f"captions line {lineno}: {e}") from e
            if sid in seen:
                raise DuplicateId(f"captions line {lineno}: duplicate sample_id {sid!r}")
            seen.add(sid)
            if len(resp) > max_prompts:
                raise ConfigError(
                    f"captions line {lineno}: {len(resp)} responses > {max_prompts} prompts"
                )
            records.append(DiscoveredLabelRecord(sid, resp))
    return records


def default_retain_filter(max_words: int = 4) -> Callable[[str], bool]:
    """Reject raw answers that are multi-label (comma) or over-specific (> max_words)."""

    def retain(answer: str) -> bool:
        if "," in answer:
            return False
        if len(answer.split()) > max_words:
            return False
        return bool(normalize_label(answer))

    return retain


def majority_vote(
    responses: list[str], retain_filter: Callable[[str], bool]
) -> Optional[str]:
    """Plurality label among retained answers; ties go to the earliest first occurrence.

    Returns None when no answer survives the filter.
    """
    counts: dict[str, int] = {}
    first_seen: dict[str, int] = {}
    for pos, answer in enumerate(responses):
        if not retain_filter(answer):
            continue
        label = normalize_label(answer)
        if not label:
            continue
        counts[label] = counts.get(label, 0) + 1
        first_seen.setdefault(label, pos)
    if not counts:
        return None
    return min(counts, key=lambda lab: (-counts[lab], first_seen[lab]))


def vote_records(
    records: list[DiscoveredLabelRecord],
    retain_filter: Optional[Callable[[str], bool]] = None,
) -> list[DiscoveredLabelRecord]:
    """Fill voted_label on every record (answers taken in prompt-index order)."""
    retain = retain_filter or default_retain_filter()
    out = []
    for rec in records:
        answers = [a for _, a in sorted(rec.responses, key=lambda pa: pa[0])]
        out.append(
            DiscoveredLabelRecord(rec.sample_id, list(rec.responses), majority_vote(answers, retain))
        )
    return out


def collect_discovered(
    records: list[DiscoveredLabelRecord],
) -> tuple[LabelSet, dict[str, str]]:
    """Deduplicated union of voted labels plus the per-sample r_i map for banking.

    The label set is sorted so the result is independent of record order.
    """
    per_sample: dict[str, str] = {}
    for rec in records:
        if rec.voted_label:
            per_sample[rec.sample_id] = normalize_label(rec.voted_label)
    labels = sorted(set(per_sample.values()))
    return LabelSet(labels, "discovered"), per_sample


SPLIT_SETTINGS = ("OPDA", "ODA", "PDA", "CDA")


@dataclass
class SplitConfig:
    """Category-count split of a UniDA task (source-private / shared / target-private)."""

    n_source_private: int
    n_shared: int
    n_target_private: int
    setting: str

    def __post_init__(self) -> None:
        if self.setting not in SPLIT_SETTINGS:
            raise ConfigError(f"unknown split setting {self.setting!r}")
        if self.n_shared < 1 or self.n_source_private < 0 or self.n_target_private < 0:
            raise ConfigError("split counts out of range")
        if self.setting == "ODA" and not (self.n_source_private == 0 and self.n_target_private > 0):
            raise ConfigError("ODA requires no source-private and some target-private classes")
        if self.setting == "PDA" and self.n_target_private != 0:
            raise ConfigError("PDA requires no target-private classes")
        if self.setting == "CDA" and (self.n_source_private != 0 or self.n_target_private != 0):
            raise ConfigError("CDA requires no private classes on either side")

    @property
    def has_private(self) -> bool:
        return self.n_target_private > 0
