"""Command-line pipeline orchestration.

One TOML config names the inputs and knobs; each stage is also invokable on
its own and communicates with the others only through files in the output
directory, so chained subcommands reproduce the monolithic `run` byte for
byte. Failures print a single machine-readable JSON line on stderr naming
the failing stage; exit codes: 2 config, 3 data/compute, 1 unexpected.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python 3.10
    import tomli as tomllib

from . import align, classifier, corpus, lexicon, metrics, refine, selftrain
from .errors import ConfigError, TlsaError

log = logging.getLogger(__name__)

VOTES_FILE = "votes.jsonl"
DISCOVERED_FILE = "discovered.txt"
FILTERED_FILE = "filtered.txt"
BANK_FILE = "bank.json"
AUDIT_FILE = "audit.jsonl"
CP_FILE = "c_p.txt"
REPORT_FILE = "report.tsv"
PREDICTIONS_FILE = "predictions.jsonl"
ADAPTER_BIN = "adapter.emb1"
ADAPTER_META = "adapter.meta.json"
HISTORY_FILE = "history.csv"
METRICS_FILE = "metrics.json"

_PATH_KEYS = (
    "image_embeddings",
    "label_embeddings",
    "captions",
    "synonyms",
    "source_labels",
    "truth",
    "out_dir",
)
_PIPELINE_KEYS = ("k", "epsilon", "batch_size", "seed", "per_class_accuracy")
_SELFTRAIN_KEYS = (
    "enabled",
    "iterations",
    "batch_size",
    "lr",
    "ema_alpha",
    "teacher_update_period",
    "temperature",
    "bottleneck",
    "adapter_scale",
    "init_std",
    "selection",
    "top_percent",
    "target_style",
)


@dataclass
class PipelineConfig:
    image_embeddings: Optional[Path]
    label_embeddings: Optional[Path]
    captions: Optional[Path]
    synonyms: Optional[Path]
    source_labels: Optional[Path]
    truth: Optional[Path]
    out_dir: Path
    k: int = 5
    epsilon: float = 0.01
    batch_size: int = 128
    seed: int = 0
    per_class_accuracy: bool = True
    selftrain: Optional[selftrain.TrainConfig] = None
    selftrain_enabled: bool = False

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ConfigError(f"k must be >= 2, got {self.k}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")


def _reject_unknown(section: dict, allowed: tuple, name: str) -> None:
    extra = sorted(set(section) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(extra)}")


def load_config(
    path,
    k: Optional[int] = None,
    epsilon: Optional[float] = None,
    batch_size: Optional[int] = None,
    seed: Optional[int] = None,
    out_dir: Optional[str] = None,
) -> PipelineConfig:
    """Parse the TOML config; flag overrides win. Paths resolve relative to
    the config file's directory."""
    cfg_path = Path(path)
    try:
        with open(cfg_path, "rb") as f:
            raw = tomllib.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {cfg_path}: {exc}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML in {cfg_path}: {exc}")
    _reject_unknown(raw, ("paths", "pipeline", "selftrain"), "top level")
    paths = raw.get("paths", {})
    pipe = raw.get("pipeline", {})
    st = raw.get("selftrain", None)
    _reject_unknown(paths, _PATH_KEYS, "paths")
    _reject_unknown(pipe, _PIPELINE_KEYS, "pipeline")

    base = cfg_path.parent

    def resolve(key: str) -> Optional[Path]:
        value = paths.get(key)
        return None if value is None else (base / str(value))

    train_cfg = None
    enabled = False
    if st is not None:
        _reject_unknown(st, _SELFTRAIN_KEYS, "selftrain")
        st = dict(st)
        enabled = bool(st.pop("enabled", True))
        period = st.pop("teacher_update_period", 0)
        try:
            train_cfg = selftrain.TrainConfig(
                teacher_update_period=int(period) or None, **st
            )
        except TypeError as exc:
            raise ConfigError(f"bad [selftrain] section: {exc}")

    out = Path(out_dir) if out_dir else resolve("out_dir")
    if out is None:
        raise ConfigError("config must set paths.out_dir (or pass --out)")

    return PipelineConfig(
        image_embeddings=resolve("image_embeddings"),
        label_embeddings=resolve("label_embeddings"),
        captions=resolve("captions"),
        synonyms=resolve("synonyms"),
        source_labels=resolve("source_labels"),
        truth=resolve("truth"),
        out_dir=out,
        k=int(k if k is not None else pipe.get("k", 5)),
        epsilon=float(epsilon if epsilon is not None else pipe.get("epsilon", 0.01)),
        batch_size=int(
            batch_size if batch_size is not None else pipe.get("batch_size", 128)
        ),
        seed=int(seed if seed is not None else pipe.get("seed", 0)),
        per_class_accuracy=bool(pipe.get("per_class_accuracy", True)),
        selftrain=train_cfg,
        selftrain_enabled=enabled and train_cfg is not None,
    )


def _require_paths(cfg: PipelineConfig, keys: list[str]) -> None:
    """Fail before any compute when a needed input is unset or absent."""
    missing = []
    for key in keys:
        p = getattr(cfg, key)
        if p is None:
            missing.append(f"paths.{key} is not set")
        elif not Path(p).is_file():
            missing.append(f"paths.{key}: no such file {p}")
    if missing:
        raise ConfigError("; ".join(missing))


def _require_artifact(cfg: PipelineConfig, name: str) -> Path:
    p = cfg.out_dir / name
    if not p.is_file():
        raise ConfigError(
            f"missing artifact {p}; run the producing stage first"
        )
    return p


# ---------------------------------------------------------------------------
# stage bodies (shared between subcommands and `run`)


def _discover(cfg: PipelineConfig):
    records = corpus.load_captions(cfg.captions)
    voted = corpus.vote_records(records)
    discovered, per_sample = corpus.collect_discovered(voted)
    return voted, discovered, per_sample


def _write_votes(voted, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in voted:
            f.write(
                json.dumps(
                    {
                        "sample_id": rec.sample_id,
                        "voted_label": rec.voted_label,
                        "n_responses": len(rec.responses),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def stage_discover(cfg: PipelineConfig, _args) -> None:
    _require_paths(cfg, ["captions"])
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    voted, discovered, _ = _discover(cfg)
    _write_votes(voted, cfg.out_dir / VOTES_FILE)
    corpus.write_label_file(discovered.labels, cfg.out_dir / DISCOVERED_FILE)
    print(f"discover: {len(discovered)} candidate labels from {len(voted)} samples")


def _load_source(cfg: PipelineConfig) -> corpus.LabelSet:
    return corpus.load_label_file(cfg.source_labels, "source")


def _load_normalized_table(path, what: str) -> corpus.EmbeddingTable:
    table = corpus.load_embeddings(path)
    if not table.normalized:
        log.warning("%s table is not unit-normalized; normalizing", what)
        table = corpus.normalize_rows(table)
    return table


def _scoring_table(
    cfg: PipelineConfig, source: corpus.LabelSet, kept: corpus.LabelSet
) -> corpus.EmbeddingTable:
    """Source rows first (all mandatory), then the filtered discovered labels
    that have embeddings; discovered labels without rows are dropped."""
    table = _load_normalized_table(cfg.label_embeddings, "label")
    have = set(table.ids)
    absent = [lab for lab in source.labels if lab not in have]
    if absent:
        raise ConfigError(
            f"label embeddings missing source label(s): {', '.join(absent[:5])}"
        )
    scorable = [lab for lab in kept.labels if lab in have]
    for lab in kept.labels:
        if lab not in have:
            log.warning("discovered label %r has no embedding; dropped", lab)
    return table.subset(list(source.labels) + scorable)


def stage_align(cfg: PipelineConfig, args) -> None:
    _require_paths(
        cfg,
        ["captions", "synonyms", "source_labels", "image_embeddings", "label_embeddings"],
    )
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    voted, discovered, _ = _discover(cfg)
    source = _load_source(cfg)
    db = lexicon.parse_synonym_db(cfg.synonyms)
    kept, removed = lexicon.synonym_align(db, discovered, source)
    corpus.write_label_file(kept.labels, cfg.out_dir / FILTERED_FILE)
    images = _load_normalized_table(cfg.image_embeddings, "image")
    labels = _scoring_table(cfg, source, kept)
    result = align.run_alignment(
        images, labels, source, voted, k=cfg.k, batch_size=cfg.batch_size
    )
    result.bank.save(cfg.out_dir / BANK_FILE)
    if getattr(args, "audit", False):
        result.write_audit(cfg.out_dir / AUDIT_FILE)
    print(
        f"align: banked {result.bank.total()} labels over {len(images)} samples "
        f"({len(kept)} discovered kept, {len(removed)} merged into source)"
    )


def stage_refine(cfg: PipelineConfig, args) -> None:
    _require_paths(cfg, ["source_labels", "synonyms"])
    bank_path = getattr(args, "bank", None) or _require_artifact(cfg, BANK_FILE)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    bank = align.FrequencyBank.load(bank_path)
    source = _load_source(cfg)
    db = lexicon.parse_synonym_db(cfg.synonyms)
    c_p = refine.frequency_filter(
        bank, source, refine.RefineConfig(cfg.epsilon), synonyms=db
    )
    corpus.write_label_file(c_p.labels, cfg.out_dir / CP_FILE)
    refine.write_report(refine.report_candidates(bank, c_p), cfg.out_dir / REPORT_FILE)
    print(f"refine: kept {len(c_p)} target-private labels")


def _build_classifier(cfg: PipelineConfig) -> classifier.UniversalClassifier:
    source = _load_source(cfg)
    c_p = corpus.load_label_file(_require_artifact(cfg, CP_FILE), "private-predicted")
    table = _load_normalized_table(cfg.label_embeddings, "label")
    have = set(table.ids)
    absent = [lab for lab in source.labels if lab not in have]
    if absent:
        raise ConfigError(
            f"label embeddings missing source label(s): {', '.join(absent[:5])}"
        )
    private_ids = [lab for lab in c_p.labels if lab in have]
    for lab in c_p.labels:
        if lab not in have:
            log.warning("predicted-private label %r has no embedding; dropped", lab)
    source_emb = table.subset(list(source.labels))
    private_emb = table.subset(private_ids) if private_ids else None
    return classifier.build(source_emb, private_emb)


def _load_student(path_bin, path_meta) -> selftrain.AdapterParams:
    student, _ = selftrain.load_checkpoint(path_bin, path_meta)
    return student


def stage_predict(cfg: PipelineConfig, args) -> None:
    _require_paths(cfg, ["source_labels", "image_embeddings", "label_embeddings"])
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    clf = _build_classifier(cfg)
    images = _load_normalized_table(cfg.image_embeddings, "image")
    rows = images.rows
    adapter_bin = getattr(args, "adapter", None)
    if adapter_bin:
        meta = Path(adapter_bin).with_suffix(".meta.json")
        student = _load_student(adapter_bin, meta)
        rows = selftrain.adapter_apply(student, rows.astype(np.float64)).astype(
            np.float32
        )
    emitted, raw, probs = classifier.predict_batch(clf, rows)
    with_probs = bool(getattr(args, "probs", False))
    with open(cfg.out_dir / PREDICTIONS_FILE, "w", encoding="utf-8") as f:
        for i, sid in enumerate(images.ids):
            row = {
                "sample_id": sid,
                "class_index": int(emitted[i]),
                "label": clf.label_order[int(raw[i])],
                "is_unknown": bool(raw[i] >= clf.n_source),
            }
            if with_probs:
                row["probs"] = [float(p) for p in probs[i]]
            f.write(json.dumps(row, sort_keys=True) + "\n")
    n_unknown = int(np.sum(raw >= clf.n_source))
    print(f"predict: {len(images)} samples, {n_unknown} emitted as unknown")


def stage_selftrain(cfg: PipelineConfig, _args) -> None:
    _require_paths(cfg, ["source_labels", "image_embeddings", "label_embeddings"])
    if cfg.selftrain is None:
        raise ConfigError("config has no [selftrain] section")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    clf = _build_classifier(cfg)
    images = _load_normalized_table(cfg.image_embeddings, "image")
    result = selftrain.train(images, clf, cfg.selftrain, seed=cfg.seed)
    selftrain.save_checkpoint(
        result, cfg.out_dir / ADAPTER_BIN, cfg.out_dir / ADAPTER_META
    )
    result.write_history(cfg.out_dir / HISTORY_FILE)
    last = result.history[-1][1] if result.history else 0.0
    print(f"selftrain: {cfg.selftrain.iterations} iterations, final loss {last:.6f}")


def stage_evaluate(cfg: PipelineConfig, _args) -> None:
    _require_paths(cfg, ["truth"])
    preds = metrics.load_predictions(_require_artifact(cfg, PREDICTIONS_FILE))
    truth = metrics.load_truth(cfg.truth)
    result = metrics.evaluate(preds, truth, per_class=cfg.per_class_accuracy)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    result.save(cfg.out_dir / METRICS_FILE)
    if result.mode == "h":
        print(
            f"evaluate: h={result.h_score:.4f} (common {result.acc_common:.4f}, "
            f"private {result.acc_private:.4f}, nmi {result.nmi:.4f}, "
            f"h3 {result.h3_score:.4f})"
        )
    else:
        print(f"evaluate: accuracy={result.acc_common:.4f} (no private samples)")


def stage_run(cfg: PipelineConfig, args) -> None:
    stage_discover(cfg, args)
    stage_align(cfg, args)
    stage_refine(cfg, args)
    stage_predict(cfg, args)
    if cfg.selftrain_enabled:
        stage_selftrain(cfg, args)
        args.adapter = str(cfg.out_dir / ADAPTER_BIN)
        stage_predict(cfg, args)
    if cfg.truth is not None:
        stage_evaluate(cfg, args)


_STAGES = {
    "discover": stage_discover,
    "align": stage_align,
    "refine": stage_refine,
    "predict": stage_predict,
    "selftrain": stage_selftrain,
    "evaluate": stage_evaluate,
    "run": stage_run,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tlsa", description="Training-free label-space alignment pipeline."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="info-level logs")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _STAGES:
        p = sub.add_parser(name, help=f"{name} stage")
        p.add_argument("--config", required=True, help="TOML config path")
        p.add_argument("--k", type=int, default=None, help="prediction set size")
        p.add_argument("--epsilon", type=float, default=None, help="frequency ratio")
        p.add_argument("--batch-size", type=int, default=None, help="alignment batch")
        p.add_argument("--seed", type=int, default=None, help="self-training seed")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--audit", action="store_true", help="write per-sample audit log")
        if name in ("refine",):
            p.add_argument("--bank", default=None, help="bank file to refine")
        if name in ("predict",):
            p.add_argument("--adapter", default=None, help="adapter checkpoint (.emb1)")
            p.add_argument("--probs", action="store_true", help="include probabilities")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr
    )
    stage = "config"
    try:
        cfg = load_config(
            args.config,
            k=args.k,
            epsilon=args.epsilon,
            batch_size=args.batch_size,
            seed=args.seed,
            out_dir=args.out,
        )
        stage = args.command
        _STAGES[args.command](cfg, args)
        return 0
    except TlsaError as exc:
        print(
            json.dumps(
                {"stage": stage, "error": type(exc).__name__, "message": str(exc)},
                sort_keys=True,
            ),
            file=sys.stderr,
        )
        return 2 if isinstance(exc, ConfigError) else 3
    except Exception as exc:  # pragma: no cover - defensive
        print(
            json.dumps(
                {"stage": stage, "error": type(exc).__name__, "message": str(exc)},
                sort_keys=True,
            ),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
