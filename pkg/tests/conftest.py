"""Shared synthetic fixtures: well-separated unit-vector clusters with
captions, truth rows, and writers that lay the same data out as files for
the CLI tests.

Label embeddings are the cluster centroids; images are centroid plus
Gaussian noise, re-normalized. Every sample's captions agree on its true
label, so discovery is exact and the pipeline's ideal output is known.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tlsa import corpus

SHARED_POOL = ["cat", "dog", "car", "tree", "boat", "horse", "chair", "plane"]
PRIVATE_POOL = ["piano", "kettle", "lamp", "violin", "cactus"]


@dataclass
class ClusterFixture:
    shared: list[str]
    private: list[str]
    label_table: corpus.EmbeddingTable  # shared labels first, then private
    images: corpus.EmbeddingTable
    records: list[corpus.DiscoveredLabelRecord]
    truth: dict[str, dict]  # sample_id -> {true_label, is_private}

    @property
    def source(self) -> corpus.LabelSet:
        return corpus.LabelSet(self.shared, "source")


def make_clusters(
    seed: int,
    n_shared: int = 5,
    n_private: int = 3,
    d: int = 32,
    per_cluster: int = 20,
    noise: float = 0.05,
) -> ClusterFixture:
    assert n_shared <= len(SHARED_POOL) and n_private <= len(PRIVATE_POOL)
    rng = np.random.default_rng(seed)
    shared = SHARED_POOL[:n_shared]
    private = PRIVATE_POOL[:n_private]
    labels = shared + private
    cents = rng.standard_normal((len(labels), d))
    cents /= np.linalg.norm(cents, axis=1, keepdims=True)
    label_table = corpus.EmbeddingTable(
        list(labels), cents.astype(np.float32), normalized=True
    )

    ids, rows, records, truth = [], [], [], {}
    for ci, lab in enumerate(labels):
        for j in range(per_cluster):
            sid = f"s{ci:02d}_{j:03d}"
            v = cents[ci] + noise * rng.standard_normal(d)
            v /= np.linalg.norm(v)
            ids.append(sid)
            rows.append(v)
            records.append(
                corpus.DiscoveredLabelRecord(sid, [(p, lab) for p in range(5)], None)
            )
            truth[sid] = {"true_label": lab, "is_private": ci >= n_shared}
    images = corpus.EmbeddingTable(
        ids, np.asarray(rows, dtype=np.float32), normalized=True
    )
    return ClusterFixture(shared, private, label_table, images, records, truth)


def write_captions(records, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(
                json.dumps(
                    {
                        "sample_id": rec.sample_id,
                        "responses": [
                            {"prompt": p, "answer": a} for p, a in rec.responses
                        ],
                    }
                )
                + "\n"
            )


def write_truth(truth: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for sid in sorted(truth):
            row = {"sample_id": sid, **truth[sid]}
            f.write(json.dumps(row, sort_keys=True) + "\n")


def write_fixture(
    fx: ClusterFixture,
    root: Path,
    selftrain_lines: list[str] | None = None,
    pipeline_lines: list[str] | None = None,
) -> Path:
    """Lay the fixture out as pipeline input files plus a TOML config;
    returns the config path."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    corpus.write_embeddings(fx.images, root / "images.emb1")
    corpus.write_embeddings(fx.label_table, root / "labels.emb1")
    write_captions(fx.records, root / "captions.jsonl")
    corpus.write_label_file(fx.shared, root / "source_labels.txt")
    write_truth(fx.truth, root / "truth.jsonl")
    (root / "synonyms.syn").write_text("sofa|couch\n", encoding="utf-8")

    lines = [
        "[paths]",
        'image_embeddings = "images.emb1"',
        'label_embeddings = "labels.emb1"',
        'captions = "captions.jsonl"',
        'synonyms = "synonyms.syn"',
        'source_labels = "source_labels.txt"',
        'truth = "truth.jsonl"',
        'out_dir = "out"',
        "",
        "[pipeline]",
    ] + (pipeline_lines or [])
    if selftrain_lines is not None:
        lines += ["", "[selftrain]"] + selftrain_lines
    (root / "config.toml").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return root / "config.toml"
