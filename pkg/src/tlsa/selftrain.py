"""Step 4 self-training: balanced pseudo-label selection, residual bottleneck
adapter trained by SGD on the soft cross-entropy against a delayed-EMA
teacher, with the classifier weights frozen throughout.

The adapter maps a frozen unit embedding x to normalize(x + scale *
relu(x W_down) W_up). W_up starts at zero so the student begins exactly at
zero-shot behavior.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .classifier import UniversalClassifier, softmax
from .corpus import EmbeddingTable, write_embeddings, load_embeddings
from .errors import ConfigError, ShapeMismatch

DEFAULT_BOTTLENECK = 64


@dataclass
class AdapterParams:
    w_down: np.ndarray  # (d, r)
    w_up: np.ndarray    # (r, d)
    scale: float = 1.0

    def __post_init__(self) -> None:
        self.w_down = np.asarray(self.w_down, dtype=np.float64)
        self.w_up = np.asarray(self.w_up, dtype=np.float64)
        if self.w_down.ndim != 2 or self.w_up.ndim != 2:
            raise ShapeMismatch("adapter matrices must be 2-D")
        if self.w_down.shape != self.w_up.shape[::-1]:
            raise ShapeMismatch(
                f"w_down {self.w_down.shape} incompatible with w_up {self.w_up.shape}"
            )
        if not (np.all(np.isfinite(self.w_down)) and np.all(np.isfinite(self.w_up))):
            raise ShapeMismatch("adapter parameters must be finite")

    @property
    def dim(self) -> int:
        return self.w_down.shape[0]

    @property
    def bottleneck(self) -> int:
        return self.w_down.shape[1]

    def copy(self) -> "AdapterParams":
        return AdapterParams(self.w_down.copy(), self.w_up.copy(), self.scale)


def init_adapter(
    dim: int,
    bottleneck: int = DEFAULT_BOTTLENECK,
    scale: float = 1.0,
    rng: Optional[np.random.Generator] = None,
    init_std: float = 0.02,
) -> AdapterParams:
    """Small random down-projection, zero up-projection: identity at start."""
    rng = rng or np.random.default_rng(0)
    w_down = rng.normal(0.0, init_std, size=(dim, bottleneck))
    w_up = np.zeros((bottleneck, dim))
    return AdapterParams(w_down, w_up, scale)


def adapter_apply(adapter: AdapterParams, x: np.ndarray) -> np.ndarray:
    """Residual bottleneck pass, re-normalized to unit rows. x: (N, d)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != adapter.dim:
        raise ShapeMismatch(f"input dim {x.shape[-1]} != adapter dim {adapter.dim}")
    h = x @ adapter.w_down
    y = x + adapter.scale * (np.maximum(h, 0.0) @ adapter.w_up)
    norms = np.linalg.norm(y, axis=-1, keepdims=True)
    if np.min(norms) < 1e-12:
        raise FloatingPointError("adapter output collapsed to zero norm")
    return y / norms


def forward_probs(
    adapter: AdapterParams,
    clf: UniversalClassifier,
    images: np.ndarray,
    temperature: float,
) -> np.ndarray:
    """Train-time forward: adapted embeddings against the frozen classifier,
    float64 throughout so it matches loss_and_grad bit for bit."""
    u = adapter_apply(adapter, np.asarray(images, dtype=np.float64))
    logits = (u @ clf.weights.astype(np.float64).T) / temperature
    return softmax(logits, axis=-1)


def student_forward(
    adapter: AdapterParams,
    clf: UniversalClassifier,
    image: np.ndarray,
    temperature: float,
) -> np.ndarray:
    """Softmax of one adapted embedding against the frozen classifier."""
    return forward_probs(adapter, clf, np.asarray(image)[None, :], temperature)[0]


def loss_and_grad(
    adapter: AdapterParams,
    clf: UniversalClassifier,
    images: np.ndarray,
    teacher_probs: np.ndarray,
    temperature: float,
) -> tuple[float, AdapterParams]:
    """Mean soft cross-entropy over the batch and its analytic adapter gradients.

    Backpropagates through softmax, the cosine head, row re-normalization,
    and the residual bottleneck. Classifier weights receive no gradient.
    """
    x = np.asarray(images, dtype=np.float64)
    q = np.asarray(teacher_probs, dtype=np.float64)
    if x.ndim != 2 or q.shape != (x.shape[0], clf.n_labels):
        raise ShapeMismatch(
            f"batch {x.shape} / targets {q.shape} incompatible with classifier "
            f"({clf.n_labels} labels)"
        )
    n = x.shape[0]
    w = clf.weights.astype(np.float64)

    h = x @ adapter.w_down
    a = np.maximum(h, 0.0)
    y = x + adapter.scale * (a @ adapter.w_up)
    norms = np.linalg.norm(y, axis=1, keepdims=True)
    if np.min(norms) < 1e-12:
        raise FloatingPointError("adapter output collapsed to zero norm")
    u = y / norms
    logits = (u @ w.T) / temperature
    p = softmax(logits, axis=1)

    with np.errstate(divide="ignore"):
        logp = np.log(p)
    loss = float(-np.sum(q * np.where(q > 0, logp, 0.0)) / n)

    dz = (p - q) / n
    du = (dz @ w) / temperature
    dy = (du - np.sum(du * u, axis=1, keepdims=True) * u) / norms
    d_up = adapter.scale * (a.T @ dy)
    da = adapter.scale * (dy @ adapter.w_up.T)
    dh = da * (h > 0.0)
    d_down = x.T @ dh
    return loss, AdapterParams(d_down, d_up, 0.0)


def ema_update(teacher: AdapterParams, student: AdapterParams, alpha: float) -> AdapterParams:
    """Convex combination with alpha weighting the old teacher."""
    if not (0.0 <= alpha <= 1.0):
        raise ConfigError(f"ema alpha must be in [0, 1], got {alpha}")
    return AdapterParams(
        (1.0 - alpha) * student.w_down + alpha * teacher.w_down,
        (1.0 - alpha) * student.w_up + alpha * teacher.w_up,
        (1.0 - alpha) * student.scale + alpha * teacher.scale,
    )


@dataclass
class PseudoLabelSet:
    entries: list[tuple[str, int, float]]  # (sample_id, class, confidence)

    def sample_ids(self) -> list[str]:
        return [sid for sid, _, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def select_pseudo_labels(
    teacher_preds: list[tuple[str, int, float]], batch_size: int
) -> PseudoLabelSet:
    """Balanced top-k per predicted class: cap = floor(min(n_ci, N / n_c)).

    Ties in confidence resolve by sample id. Classes are emitted in sorted
    order so the result is deterministic.
    """
    by_class: dict[int, list[tuple[str, int, float]]] = {}
    for sid, cls, conf in teacher_preds:
        by_class.setdefault(cls, []).append((sid, cls, conf))
    if not by_class:
        return PseudoLabelSet([])
    n_c = len(by_class)
    entries: list[tuple[str, int, float]] = []
    for cls in sorted(by_class):
        group = sorted(by_class[cls], key=lambda e: (-e[2], e[0]))
        cap = int(min(len(group), batch_size / n_c))
        entries.extend(group[:cap])
    return PseudoLabelSet(entries)


def select_top_percent(
    teacher_preds: list[tuple[str, int, float]], percent: float
) -> PseudoLabelSet:
    """Per-class top-k% selection (ablation comparator; no balancing cap)."""
    by_class: dict[int, list[tuple[str, int, float]]] = {}
    for sid, cls, conf in teacher_preds:
        by_class.setdefault(cls, []).append((sid, cls, conf))
    entries: list[tuple[str, int, float]] = []
    for cls in sorted(by_class):
        group = sorted(by_class[cls], key=lambda e: (-e[2], e[0]))
        keep = max(1, int(percent * len(group)))
        entries.extend(group[:keep])
    return PseudoLabelSet(entries)


@dataclass
class TrainConfig:
    iterations: int = 2500
    batch_size: int = 64
    lr: float = 0.01
    ema_alpha: float = 0.999
    teacher_update_period: Optional[int] = None  # None = teacher never updates
    temperature: float = 0.01
    bottleneck: int = DEFAULT_BOTTLENECK
    adapter_scale: float = 1.0
    init_std: float = 0.02
    selection: str = "balanced"  # balanced | top_percent | none
    top_percent: float = 0.5
    target_style: str = "hard"  # hard = one-hot teacher argmax, soft = teacher softmax

    def __post_init__(self) -> None:
        if self.iterations < 0 or self.batch_size < 1 or self.lr <= 0:
            raise ConfigError("iterations, batch_size, lr must be positive")
        if not (0.0 < self.ema_alpha < 1.0):
            raise ConfigError("ema_alpha must be in (0, 1)")
        if self.teacher_update_period is not None and self.teacher_update_period < 1:
            raise ConfigError("teacher_update_period must be positive or None")
        if self.temperature <= 0 or self.bottleneck < 1:
            raise ConfigError("temperature and bottleneck must be positive")
        if self.selection not in ("balanced", "top_percent", "none"):
            raise ConfigError(f"unknown selection strategy {self.selection!r}")
        if self.target_style not in ("hard", "soft"):
            raise ConfigError(f"unknown target style {self.target_style!r}")


@dataclass
class TrainResult:
    student: AdapterParams
    teacher: AdapterParams
    history: list[tuple[int, float, int]] = field(default_factory=list)

    def write_history(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["iteration", "loss", "n_pseudo"])
            for it, loss, n in self.history:
                writer.writerow([it, repr(loss), n])


def train(
    target_images: EmbeddingTable,
    clf: UniversalClassifier,
    cfg: TrainConfig,
    seed: int = 0,
) -> TrainResult:
    """Teacher-student loop: per iteration the teacher pseudo-labels a sampled
    batch, the selected subset drives one student SGD step, and the teacher
    EMA-updates once per teacher_update_period (the delayed schedule).

    Targets default to the teacher's one-hot pseudo-labels. With soft targets
    and an identical init, student and teacher agree bit for bit, the
    gradient is exactly zero, and nothing would ever train; the hard default
    is what makes self-training move.
    """
    if target_images.dim != clf.dim:
        raise ShapeMismatch(f"image dim {target_images.dim} != classifier dim {clf.dim}")
    rng = np.random.default_rng(seed)
    student = init_adapter(
        clf.dim, cfg.bottleneck, cfg.adapter_scale, rng, cfg.init_std
    )
    teacher = student.copy()
    x_all = target_images.rows.astype(np.float64)
    ids = target_images.ids
    n = x_all.shape[0]
    history: list[tuple[int, float, int]] = []

    for it in range(cfg.iterations):
        idx = rng.permutation(n)[: cfg.batch_size]
        xb = x_all[idx]
        probs_t = forward_probs(teacher, clf, xb, cfg.temperature)
        raw = np.argmax(probs_t, axis=1)
        conf = probs_t[np.arange(len(idx)), raw]
        preds = [(ids[int(i)], int(c), float(p)) for i, c, p in zip(idx, raw, conf)]

        if cfg.selection == "balanced":
            chosen = select_pseudo_labels(preds, len(idx))
        elif cfg.selection == "top_percent":
            chosen = select_top_percent(preds, cfg.top_percent)
        else:
            chosen = PseudoLabelSet(preds)

        if cfg.target_style == "hard":
            targets = np.zeros_like(probs_t)
            targets[np.arange(len(idx)), raw] = 1.0
        else:
            targets = probs_t

        pos = {sid: j for j, sid in enumerate(ids[int(i)] for i in idx)}
        sel = [pos[sid] for sid in chosen.sample_ids()]
        loss = 0.0
        if sel:
            loss, grads = loss_and_grad(
                student, clf, xb[sel], targets[sel], cfg.temperature
            )
            student.w_down -= cfg.lr * grads.w_down
            student.w_up -= cfg.lr * grads.w_up
        if cfg.teacher_update_period and (it + 1) % cfg.teacher_update_period == 0:
            teacher = ema_update(teacher, student, cfg.ema_alpha)
        history.append((it, loss, len(sel)))
    return TrainResult(student, teacher, history)


def save_checkpoint(result: TrainResult, bin_path, json_path) -> None:
    """Adapter matrices in an EMB1 container (column/row vectors as rows)
    plus a JSON sidecar with the scalars."""
    dim = result.student.dim
    r = result.student.bottleneck
    ids = []
    rows = []
    for role, params in (("student", result.student), ("teacher", result.teacher)):
        for j in range(r):
            ids.append(f"{role}.down.c{j}")
            rows.append(params.w_down[:, j])
        for j in range(r):
            ids.append(f"{role}.up.r{j}")
            rows.append(params.w_up[j, :])
    table = EmbeddingTable(ids, np.asarray(rows, dtype=np.float32), normalized=False)
    write_embeddings(table, bin_path)
    meta = {
        "dim": dim,
        "bottleneck": r,
        "student_scale": result.student.scale,
        "teacher_scale": result.teacher.scale,
    }
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def load_checkpoint(bin_path, json_path) -> tuple[AdapterParams, AdapterParams]:
    with open(json_path, "r", encoding="utf-8") as f:
        meta = json.load(f)
    dim, r = int(meta["dim"]), int(meta["bottleneck"])
    table = load_embeddings(bin_path)
    if table.dim != dim or len(table) != 4 * r:
        raise ShapeMismatch("checkpoint container does not match its sidecar")
    pos = {id_: i for i, id_ in enumerate(table.ids)}
    out = []
    for role in ("student", "teacher"):
        w_down = np.empty((dim, r))
        w_up = np.empty((r, dim))
        for j in range(r):
            w_down[:, j] = table.rows[pos[f"{role}.down.c{j}"]]
            w_up[j, :] = table.rows[pos[f"{role}.up.r{j}"]]
        out.append(AdapterParams(w_down, w_up, float(meta[f"{role}_scale"])))
    return out[0], out[1]
