"""Zero-shot inference, top-k metrics, multi-split aggregation, and the
few-shot linear-probe comparison.

Rankings are deterministic: scores sort descending with ties broken by class
index ascending, so reports are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (InvalidArgumentError, InvalidDatasetError,
                     MalformedInputError)
from .trainer import lr_at


def rank_classes(scores: np.ndarray) -> np.ndarray:
    """Class indices ordered by score descending, ties by index ascending."""
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    n, c = scores.shape
    cols = np.broadcast_to(np.arange(c), (n, c))
    order = np.lexsort((cols, -scores), axis=1)
    return order


def predict(video_pair: tuple[np.ndarray, np.ndarray],
            class_matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rank candidate classes for one video.

    class_matrix holds unit class embeddings as columns (K, T). Returns the
    ranked class indices and the fused score per class (unranked order).
    """
    if class_matrix.size == 0:
        raise InvalidArgumentError("empty class set")
    x_vo, x_ov = video_pair
    p_v = x_vo @ class_matrix
    p_o = x_ov @ class_matrix
    scores = p_v + np.maximum(p_o, 0.0)
    return rank_classes(scores)[0], scores


def topk_accuracy(rankings: np.ndarray, labels: np.ndarray, k: int) -> float:
    """Percent of samples whose true label is within the first k ranks."""
    rankings = np.atleast_2d(np.asarray(rankings))
    labels = np.asarray(labels)
    if k < 1 or k > rankings.shape[1]:
        raise InvalidArgumentError(
            f"k must be in [1, {rankings.shape[1]}], got {k}")
    hits = (rankings[:, :k] == labels[:, None]).any(axis=1)
    return float(hits.mean() * 100.0)


def aggregate_splits(values: list[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (N-1); a single split reports 0."""
    if not values:
        raise InvalidArgumentError("no split metrics to aggregate")
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return mean, std


def format_mean_std(mean: float, std: float) -> str:
    return f"{mean:.1f} ± {std:.1f}"


@dataclass
class SplitMetrics:
    """Metrics of one evaluation split."""

    top1: float
    top5: float
    n_videos: int
    per_class: dict[str, float] = field(default_factory=dict)
    class_sizes: dict[str, int] = field(default_factory=dict)
    confused_pairs: list[tuple[str, str, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "top1": self.top1, "top5": self.top5, "n_videos": self.n_videos,
            "per_class": self.per_class, "class_sizes": self.class_sizes,
            "confused_pairs": [list(p) for p in self.confused_pairs],
        }


@dataclass
class EvalReport:
    """Aggregate over independent splits, the published reporting format."""

    splits: list[SplitMetrics]
    mean_top1: float = 0.0
    std_top1: float = 0.0
    mean_top5: float = 0.0
    std_top5: float = 0.0

    def __post_init__(self):
        for s in self.splits:
            if not 0.0 <= s.top1 <= s.top5 <= 100.0:
                raise MalformedInputError(
                    f"split metrics out of range: top1={s.top1}, top5={s.top5}")
        self.mean_top1, self.std_top1 = aggregate_splits([s.top1 for s in self.splits])
        self.mean_top5, self.std_top5 = aggregate_splits([s.top5 for s in self.splits])

    def to_dict(self) -> dict:
        return {
            "splits": [s.to_dict() for s in self.splits],
            "top1": {"mean": self.mean_top1, "std": self.std_top1},
            "top5": {"mean": self.mean_top5, "std": self.std_top5},
        }

    def summary(self) -> str:
        lines = [
            f"splits: {len(self.splits)}",
            f"top-1: {format_mean_std(self.mean_top1, self.std_top1)}",
            f"top-5: {format_mean_std(self.mean_top5, self.std_top5)}",
        ]
        for i, s in enumerate(self.splits, 1):
            lines.append(f"  split {i}: top-1 {s.top1:.1f}  top-5 {s.top5:.1f}"
                         f"  ({s.n_videos} videos)")
        return "\n".join(lines)


def evaluate_rankings(rankings: np.ndarray, labels: np.ndarray,
                      class_names: list[str] | None = None,
                      top_confusions: int = 10) -> SplitMetrics:
    """Metrics plus per-class table and most-confused pairs from rankings."""
    rankings = np.atleast_2d(rankings)
    n, c = rankings.shape
    kmax = min(5, c)
    names = class_names if class_names is not None else [str(i) for i in range(c)]
    top1 = topk_accuracy(rankings, labels, 1)
    top5 = topk_accuracy(rankings, labels, kmax)
    per_class: dict[str, float] = {}
    sizes: dict[str, int] = {}
    confusion: dict[tuple[str, str], int] = {}
    pred1 = rankings[:, 0]
    for ci in np.unique(labels):
        mask = labels == ci
        sizes[names[ci]] = int(mask.sum())
        per_class[names[ci]] = float((pred1[mask] == ci).mean() * 100.0)
    for t, p in zip(labels, pred1):
        if t != p:
            key = (names[t], names[p])
            confusion[key] = confusion.get(key, 0) + 1
    pairs = sorted(confusion.items(), key=lambda kv: (-kv[1], kv[0]))
    confused = [(a, b, cnt) for (a, b), cnt in pairs[:top_confusions]]
    return SplitMetrics(top1=top1, top5=top5, n_videos=n,
                        per_class=per_class, class_sizes=sizes,
                        confused_pairs=confused)


# ---------------------------------------------------------------------------
# few-shot linear probe
# ---------------------------------------------------------------------------

@dataclass
class ProbeConfig:
    epochs: int = 100
    base_lr: float = 0.05
    weight_decay: float = 1e-4
    warmup_fraction: float = 0.1
    batch_size: int = 64
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8


def few_shot_probe(train_features: np.ndarray, train_labels: np.ndarray,
                   test_features: np.ndarray, test_labels: np.ndarray,
                   n_classes: int,
                   config: ProbeConfig | None = None) -> SplitMetrics:
    """Supervised comparison: train only a linear softmax classifier on fixed
    features with few labels per class, then score top-1/top-5."""
    cfg = config or ProbeConfig()
    train_labels = np.asarray(train_labels, dtype=np.int64)
    test_labels = np.asarray(test_labels, dtype=np.int64)
    counts = np.bincount(train_labels, minlength=n_classes)
    if np.any(counts == 0):
        missing = np.nonzero(counts == 0)[0]
        raise InvalidDatasetError(
            f"classes without training samples: {missing.tolist()}")

    d = train_features.shape[1]
    rng = np.random.default_rng(cfg.seed)
    w = rng.standard_normal((n_classes, d)) / np.sqrt(d)
    b = np.zeros(n_classes)
    m_w, v_w = np.zeros_like(w), np.zeros_like(w)
    m_b, v_b = np.zeros_like(b), np.zeros_like(b)
    onehot = np.zeros((train_labels.shape[0], n_classes))
    onehot[np.arange(train_labels.shape[0]), train_labels] = 1.0

    n = train_features.shape[0]
    steps_per_epoch = max(1, math.ceil(n / cfg.batch_size))
    total_steps = steps_per_epoch * cfg.epochs
    t = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            rows = perm[start:start + cfg.batch_size]
            x = train_features[rows]
            scores = x @ w.T + b
            _, dp = kernels.xent_rows(np.ascontiguousarray(scores),
                                      np.ascontiguousarray(onehot[rows]), 1.0)
            dp /= rows.shape[0]
            gw = dp.T @ x
            gb = dp.sum(axis=0)
            lr = lr_at(t, total_steps, cfg.base_lr, cfg.warmup_fraction)
            t += 1
            kernels.adam_step(w.reshape(-1), np.ascontiguousarray(gw.reshape(-1)),
                              m_w.reshape(-1), v_w.reshape(-1), t, lr,
                              cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay)
            kernels.adam_step(b, gb, m_b, v_b, t, lr,
                              cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay)

    test_scores = test_features @ w.T + b
    rankings = rank_classes(test_scores)
    return evaluate_rankings(rankings, test_labels)
