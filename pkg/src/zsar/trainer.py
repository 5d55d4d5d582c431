"""Optimization loop: Adam with linear warm-up and cosine annealing, per-epoch
validation, and best-epoch selection.

Training data arrives as precomputed arrays (see build_training_arrays):
video features, pooled text of each video's top concepts, pooled class text,
and the per-video top concept ids that drive the concept loss. Everything is
deterministic given the seed; there is no hidden threading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import TrainConfig
from .errors import (DegenerateEmbeddingError, InvalidDatasetError,
                     MalformedInputError, NonFiniteLossError)
from .model import JointModel
from .objective import Batch, backward, class_matrix, embed_batch, forward
from .text_embed import (Description, TokenEncoder, concatenate_descriptions,
                         pooled_feature)
from .video_embed import ConceptVocabulary, FeatureRecord, top_objects


@dataclass
class TrainingArrays:
    """Model-independent tensors derived from records and descriptions."""

    video_features: np.ndarray        # (N, d_st)
    video_concept_pools: np.ndarray   # (N, hidden)
    top_ids: np.ndarray               # (N, n_objects) int
    labels: np.ndarray                # (N,) int index into class_ids
    class_ids: list[str]
    class_pools: np.ndarray           # (S, hidden)
    concept_pools: np.ndarray         # (V, hidden) single-concept text


def build_training_arrays(records: list[FeatureRecord],
                          class_descriptions: list[Description],
                          vocab: ConceptVocabulary,
                          n_objects: int,
                          encoder: TokenEncoder) -> TrainingArrays:
    """Precompute every encoder output the optimizer will need."""
    if not records:
        raise InvalidDatasetError("no video records")
    class_ids = [d.subject_id for d in class_descriptions]
    index = {cid: i for i, cid in enumerate(class_ids)}
    labels = np.empty(len(records), dtype=np.int64)
    feats = np.stack([r.st_feature for r in records])
    tops = np.empty((len(records), n_objects), dtype=np.int64)
    vid_pools = np.empty((len(records), encoder.hidden_dim))
    for i, rec in enumerate(records):
        if rec.label is None or rec.label not in index:
            raise InvalidDatasetError(
                f"video {rec.video_id!r} has label {rec.label!r} outside the class set")
        labels[i] = index[rec.label]
        ids = top_objects(rec, vocab, n_objects)
        tops[i] = ids
        joined = concatenate_descriptions([vocab.description(j) for j in ids])
        vid_pools[i] = pooled_feature(joined, encoder)
    class_pools = np.stack([pooled_feature(d, encoder) for d in class_descriptions])
    concept_pools = np.stack([pooled_feature(d, encoder) for d in vocab.concepts])
    return TrainingArrays(feats, vid_pools, tops, labels, class_ids,
                          class_pools, concept_pools)


def make_batch(arrays: TrainingArrays, rows: np.ndarray,
               use_concepts: bool) -> Batch:
    """Slice a minibatch; the concept label space is the union of the batch
    videos' top concepts, deduplicated, so every video keeps its positives."""
    concept_pools = None
    concept_targets = None
    if use_concepts:
        union = np.unique(arrays.top_ids[rows])
        concept_pools = arrays.concept_pools[union]
        concept_targets = np.zeros((rows.shape[0], union.shape[0]))
        col = {int(c): j for j, c in enumerate(union)}
        for i, r in enumerate(rows):
            for c in arrays.top_ids[r]:
                concept_targets[i, col[int(c)]] = 1.0
    return Batch(
        video_features=arrays.video_features[rows],
        video_concept_pools=arrays.video_concept_pools[rows],
        class_pools=arrays.class_pools,
        labels=arrays.labels[rows],
        concept_pools=concept_pools,
        concept_targets=concept_targets,
    )


def lr_at(step: int, total_steps: int, base_lr: float,
          warmup_fraction: float) -> float:
    """Linear warm-up over the first fraction of steps, cosine decay after."""
    warmup = max(1, int(round(warmup_fraction * total_steps)))
    if step < warmup:
        return base_lr * (step + 1) / warmup
    remaining = max(1, total_steps - warmup)
    progress = (step - warmup) / remaining
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * progress))


class AdamState:
    """First/second moment buffers over a model's parameter dict."""

    def __init__(self, model: JointModel):
        self.m = {k: np.zeros_like(v) for k, v in model.params().items()}
        self.v = {k: np.zeros_like(v) for k, v in model.params().items()}
        self.t = 0

    def step(self, model: JointModel, grads: dict[str, np.ndarray],
             lr: float, cfg: TrainConfig) -> None:
        self.t += 1
        for name, param in model.params().items():
            kernels.adam_step(
                param.reshape(-1), np.ascontiguousarray(grads[name].reshape(-1)),
                self.m[name].reshape(-1), self.v[name].reshape(-1),
                self.t, lr, cfg.beta1, cfg.beta2, cfg.adam_eps,
                cfg.weight_decay)


@dataclass
class EvalArrays:
    """Videos plus candidate class pools for zero-shot scoring."""

    video_features: np.ndarray
    video_concept_pools: np.ndarray
    labels: np.ndarray          # (N,) int index into class_pools rows
    class_pools: np.ndarray


def build_eval_arrays(records: list[FeatureRecord],
                      class_descriptions: list[Description],
                      vocab: ConceptVocabulary, n_objects: int,
                      encoder: TokenEncoder) -> EvalArrays:
    arrays = build_training_arrays(records, class_descriptions, vocab,
                                   n_objects, encoder)
    return EvalArrays(arrays.video_features, arrays.video_concept_pools,
                      arrays.labels, arrays.class_pools)


def zero_shot_scores(model: JointModel, arrays: EvalArrays) -> np.ndarray:
    """Fused similarity of every video against every candidate class."""
    x_vo, x_ov = embed_batch(model, arrays.video_features,
                             arrays.video_concept_pools)
    z = class_matrix(model, arrays.class_pools)
    p_v = x_vo @ z.T
    p_o = x_ov @ z.T
    return p_v + np.maximum(p_o, 0.0)


def topk_hits(scores: np.ndarray, labels: np.ndarray, k: int) -> float:
    order = np.argsort(-scores, axis=1, kind="stable")
    hits = (order[:, :k] == labels[:, None]).any(axis=1)
    return float(hits.mean() * 100.0)


@dataclass
class TrainResult:
    model: JointModel
    best_epoch: int
    best_val_top1: float
    log: list[dict] = field(default_factory=list)
    excluded_concept_rows: int = 0


def train(arrays: TrainingArrays, config: TrainConfig,
          val: EvalArrays | None = None,
          model: JointModel | None = None,
          encoder: TokenEncoder | None = None) -> TrainResult:
    """Fit the joint model on seen-class data; keep the best-validation epoch.

    Without a validation set, the training arrays double as one (small toy
    runs); the log records every step's losses and the per-epoch metrics.
    """
    n = arrays.video_features.shape[0]
    if n == 0:
        raise InvalidDatasetError("empty training set")
    if model is None:
        from .text_embed import HashedTokenEncoder
        enc = encoder if encoder is not None else HashedTokenEncoder(config.hidden_dim)
        model = JointModel.create(
            embed_dim=config.embed_dim, hidden_dim=enc.hidden_dim,
            d_st=arrays.video_features.shape[1], seed=config.seed, encoder=enc)

    use_concepts = config.er_weight != 0.0
    rng = np.random.default_rng(config.seed)
    steps_per_epoch = max(1, math.ceil(n / config.batch_size))
    total_steps = steps_per_epoch * config.epochs
    adam = AdamState(model)
    log: list[dict] = []
    excluded = 0

    val_arrays = val if val is not None else EvalArrays(
        arrays.video_features, arrays.video_concept_pools,
        arrays.labels, arrays.class_pools)

    best = (-1.0, -1, None)  # (val top1, epoch, params)
    step = 0
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            rows = perm[start:start + config.batch_size]
            batch = make_batch(arrays, rows, use_concepts)

            def snapshot(losses=None):
                return {"epoch": epoch, "step": step, "losses": losses,
                        "param_norms": {k: float(np.linalg.norm(v))
                                        for k, v in model.params().items()}}

            try:
                state = forward(model, batch, config.temperature,
                                config.er_weight, config.average_loss_heads)
            except (MalformedInputError, DegenerateEmbeddingError) as exc:
                # inputs were validated up front; a failure here means the
                # parameters blew up numerically
                raise NonFiniteLossError(
                    f"numeric blow-up at epoch {epoch} step {step}: {exc}",
                    snapshot=snapshot()) from exc
            losses = state.losses
            if not all(np.isfinite(v) for v in losses.values()):
                raise NonFiniteLossError(
                    f"non-finite loss at epoch {epoch} step {step}",
                    snapshot=snapshot(losses))
            grads = backward(model, batch, state)
            lr = lr_at(step, total_steps, config.base_lr, config.warmup_fraction)
            adam.step(model, grads, lr, config)
            excluded += state.n_excluded
            log.append({"epoch": epoch, "step": step, "lr": lr,
                        "loss_ar": losses["ar"], "loss_er": losses["er"],
                        "loss": losses["total"]})
            step += 1
        try:
            scores = zero_shot_scores(model, val_arrays)
        except (MalformedInputError, DegenerateEmbeddingError) as exc:
            raise NonFiniteLossError(
                f"numeric blow-up during epoch {epoch} validation: {exc}",
                snapshot={"epoch": epoch, "step": step,
                          "param_norms": {k: float(np.linalg.norm(v))
                                          for k, v in model.params().items()}}) from exc
        kmax = min(5, scores.shape[1])
        top1 = topk_hits(scores, val_arrays.labels, 1)
        top5 = topk_hits(scores, val_arrays.labels, kmax)
        log.append({"epoch": epoch, "val_top1": top1, "val_top5": top5})
        if top1 > best[0]:
            best = (top1, epoch, {k: v.copy() for k, v in model.params().items()})

    best_top1, best_epoch, best_params = best
    if best_params is not None:
        for name, value in best_params.items():
            getattr(model, name)[...] = value
    return TrainResult(model=model, best_epoch=best_epoch,
                       best_val_top1=best_top1, log=log,
                       excluded_concept_rows=excluded)
