"""Similarity scoring, the contrastive objective, and its exact gradients.

The training loss has two parts: a recognition term matching videos to the
seen-class text embeddings, and a concept term matching the same video
embeddings to the text embeddings of objects detected in each video. Both
reuse one row-wise contrastive cross-entropy. The backward pass is written
out by hand; tests check every parameter against central finite differences.

Array conventions are row-major: class/concept matrices hold one embedding
per row, score matrices are (batch, candidates).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidLabelError, MalformedInputError
from .model import JointModel
from .video_embed import sigmoid


# ---------------------------------------------------------------------------
# public scoring/loss operations
# ---------------------------------------------------------------------------

def similarity(video_pair: tuple[np.ndarray, np.ndarray],
               class_matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dot the two video embeddings against unit class columns (K, C)."""
    x_vo, x_ov = video_pair
    if class_matrix.shape[0] != x_vo.shape[0]:
        raise MalformedInputError(
            f"class matrix rows {class_matrix.shape[0]} != embedding dim {x_vo.shape[0]}")
    return x_vo @ class_matrix, x_ov @ class_matrix


def fuse_scores(p_v: np.ndarray, p_o: np.ndarray) -> np.ndarray:
    """Add the object-stream score only where it is positive."""
    p_v = np.asarray(p_v, dtype=np.float64)
    p_o = np.asarray(p_o, dtype=np.float64)
    if p_v.shape != p_o.shape:
        raise MalformedInputError("score shapes differ")
    return p_v + np.maximum(p_o, 0.0)


def contrastive_loss(p: np.ndarray, q: np.ndarray, tau: float) -> float:
    """Temperature-scaled cross-entropy against a (multi-)hot label row."""
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    if p.shape != q.shape:
        raise MalformedInputError("score and label shapes differ")
    if tau <= 0:
        raise MalformedInputError(f"temperature must be positive, got {tau}")
    if np.any(q.sum(axis=1) <= 0):
        raise InvalidLabelError("label row without a positive entry")
    losses, _ = kernels.xent_rows(np.ascontiguousarray(p),
                                  np.ascontiguousarray(q), 1.0 / tau)
    return float(losses[0]) if losses.shape[0] == 1 else losses


def ar_loss(p: np.ndarray, p_v: np.ndarray, p_o: np.ndarray,
            q: np.ndarray, tau: float, average_heads: bool = False) -> float:
    """Recognition loss: the three score heads against one-hot labels,
    summed per sample (optionally averaged) then batch-averaged."""
    total = 0.0
    for scores in (p, p_v, p_o):
        losses, _ = kernels.xent_rows(
            np.ascontiguousarray(np.atleast_2d(scores), dtype=np.float64),
            np.ascontiguousarray(np.atleast_2d(q), dtype=np.float64), 1.0 / tau)
        total += losses.mean()
    return total / 3.0 if average_heads else total


def er_loss(p_c: np.ndarray, p_cv: np.ndarray, p_co: np.ndarray,
            q_c: np.ndarray, tau: float,
            average_heads: bool = False) -> tuple[float, int]:
    """Concept loss over the batch concept union; rows without any positive
    concept are excluded from the mean and tallied."""
    q_c = np.atleast_2d(np.asarray(q_c, dtype=np.float64))
    valid = q_c.sum(axis=1) > 0
    n_excluded = int((~valid).sum())
    if not valid.any():
        return 0.0, n_excluded
    total = 0.0
    for scores in (p_c, p_cv, p_co):
        scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
        losses, _ = kernels.xent_rows(
            np.ascontiguousarray(scores[valid]),
            np.ascontiguousarray(q_c[valid]), 1.0 / tau)
        total += losses.mean()
    return (total / 3.0 if average_heads else total), n_excluded


def total_loss(ar: float, er: float, er_weight: float) -> float:
    return ar + er_weight * er


# ---------------------------------------------------------------------------
# batched forward/backward over the full parameter set
# ---------------------------------------------------------------------------

@dataclass
class Batch:
    """Encoder outputs and targets for one optimization step.

    Text pooling is parameter-free, so pooled vectors are precomputed once:
    class_pools holds one row per candidate class, video_concept_pools the
    pooled concatenated descriptions of each video's top concepts, and
    concept_pools one row per concept in the batch union (absent when the
    concept loss is disabled).
    """

    video_features: np.ndarray          # (N, d_st)
    video_concept_pools: np.ndarray     # (N, hidden)
    class_pools: np.ndarray             # (S, hidden)
    labels: np.ndarray                  # (N,) int
    concept_pools: np.ndarray | None = None   # (C, hidden)
    concept_targets: np.ndarray | None = None  # (N, C) multi-hot

    def __post_init__(self):
        n = self.video_features.shape[0]
        if self.video_concept_pools.shape[0] != n or self.labels.shape[0] != n:
            raise MalformedInputError("batch row counts disagree")
        if (self.concept_pools is None) != (self.concept_targets is None):
            raise MalformedInputError(
                "concept_pools and concept_targets must be given together")

    @property
    def onehot(self) -> np.ndarray:
        s = self.class_pools.shape[0]
        q = np.zeros((self.labels.shape[0], s))
        q[np.arange(self.labels.shape[0]), self.labels] = 1.0
        return q


@dataclass
class ForwardState:
    """Intermediates cached by the forward pass for the backward pass."""

    losses: dict[str, float]
    n_excluded: int
    # embeddings
    z_class: np.ndarray
    x_vo: np.ndarray
    x_ov: np.ndarray
    z_concepts: np.ndarray | None
    # internals keyed by name
    cache: dict = field(default_factory=dict)


def _rows_unit(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(u, axis=1)
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        raise MalformedInputError("zero or non-finite row norm in projection")
    return u / norms[:, None], norms


def _rows_unit_backward(dx: np.ndarray, x_hat: np.ndarray,
                        norms: np.ndarray) -> np.ndarray:
    radial = (dx * x_hat).sum(axis=1, keepdims=True)
    return (dx - radial * x_hat) / norms[:, None]


def _gate_forward(x_gated, x_guide, w1, w2):
    cat = np.hstack([x_gated, x_guide])
    t = cat @ w1.T
    m = np.maximum(t, 0.0)
    g = sigmoid(m @ w2.T)
    y = x_gated * g
    out, norms = _rows_unit(y)
    return out, dict(cat=cat, t=t, m=m, g=g, norms=norms)


def _gate_backward(dout, out, c, x_gated):
    dy = _rows_unit_backward(dout, out, c["norms"])
    dg = dy * x_gated
    dx_gated = dy * c["g"]
    da = dg * c["g"] * (1.0 - c["g"])
    dw2 = da.T @ c["m"]
    dm = da @ c["w2"]
    dt = dm * (c["t"] > 0.0)
    dw1 = dt.T @ c["cat"]
    dcat = dt @ c["w1"]
    return dx_gated, dcat, dw1, dw2


def forward(model: JointModel, batch: Batch, tau: float,
            er_weight: float = 1.0, average_heads: bool = False) -> ForwardState:
    """Full objective forward pass; caches everything backward() needs."""
    if tau <= 0:
        raise MalformedInputError("temperature must be positive")
    inv_tau = 1.0 / tau

    u_cls = batch.class_pools @ model.w_class.T + model.b_class
    z_class, n_cls = _rows_unit(u_cls)
    u_v = batch.video_features @ model.w_video.T + model.b_video
    x_v, n_v = _rows_unit(u_v)
    u_o = batch.video_concept_pools @ model.w_class.T + model.b_class
    x_o, n_o = _rows_unit(u_o)

    x_vo, c_vo = _gate_forward(x_v, x_o, model.w1_vo, model.w2_vo)
    x_ov, c_ov = _gate_forward(x_o, x_v, model.w1_ov, model.w2_ov)
    c_vo.update(w1=model.w1_vo, w2=model.w2_vo)
    c_ov.update(w1=model.w1_ov, w2=model.w2_ov)

    q = batch.onehot
    p_v = x_vo @ z_class.T
    p_o = x_ov @ z_class.T
    p = p_v + np.maximum(p_o, 0.0)
    heads = {}
    l_ar = 0.0
    for name, scores in (("p", p), ("p_v", p_v), ("p_o", p_o)):
        losses, dp = kernels.xent_rows(np.ascontiguousarray(scores),
                                       np.ascontiguousarray(q), inv_tau)
        heads[name] = dp
        l_ar += losses.mean()
    if average_heads:
        l_ar /= 3.0

    z_con = None
    n_con = None
    er_heads = {}
    l_er = 0.0
    n_excluded = 0
    valid = None
    if batch.concept_pools is not None and er_weight != 0.0:
        u_con = batch.concept_pools @ model.w_class.T + model.b_class
        z_con, n_con = _rows_unit(u_con)
        p_cv = x_vo @ z_con.T
        p_co = x_ov @ z_con.T
        p_c = p_cv + p_co
        q_c = np.asarray(batch.concept_targets, dtype=np.float64)
        valid = q_c.sum(axis=1) > 0
        n_excluded = int((~valid).sum())
        if valid.any():
            for name, scores in (("p_c", p_c), ("p_cv", p_cv), ("p_co", p_co)):
                losses, dp = kernels.xent_rows(
                    np.ascontiguousarray(scores[valid]),
                    np.ascontiguousarray(q_c[valid]), inv_tau)
                full = np.zeros_like(scores)
                full[valid] = dp
                er_heads[name] = full
                l_er += losses.mean()
            if average_heads:
                l_er /= 3.0

    total = l_ar + er_weight * l_er
    return ForwardState(
        losses={"ar": l_ar, "er": l_er, "total": total},
        n_excluded=n_excluded,
        z_class=z_class, x_vo=x_vo, x_ov=x_ov, z_concepts=z_con,
        cache=dict(
            q=q, p_o=p_o, heads=heads, er_heads=er_heads, valid=valid,
            x_v=x_v, x_o=x_o, n_v=n_v, n_o=n_o, n_cls=n_cls, n_con=n_con,
            c_vo=c_vo, c_ov=c_ov, er_weight=er_weight,
            average_heads=average_heads,
        ),
    )


def backward(model: JointModel, batch: Batch, state: ForwardState) -> dict[str, np.ndarray]:
    """Gradients of the total loss for every trainable tensor."""
    c = state.cache
    n = batch.video_features.shape[0]
    head_scale = (1.0 / 3.0 if c["average_heads"] else 1.0) / n

    dp = c["heads"]["p"] * head_scale
    dp_v = c["heads"]["p_v"] * head_scale + dp
    dp_o = c["heads"]["p_o"] * head_scale + dp * (c["p_o"] > 0.0)

    x_vo, x_ov, z_class = state.x_vo, state.x_ov, state.z_class
    dx_vo = dp_v @ z_class
    dx_ov = dp_o @ z_class
    dz_class = dp_v.T @ x_vo + dp_o.T @ x_ov

    dz_con = None
    if c["er_heads"]:
        n_valid = int(c["valid"].sum())
        er_scale = c["er_weight"] * (1.0 / 3.0 if c["average_heads"] else 1.0) / n_valid
        dp_c = c["er_heads"]["p_c"] * er_scale
        dp_cv = c["er_heads"]["p_cv"] * er_scale + dp_c
        dp_co = c["er_heads"]["p_co"] * er_scale + dp_c
        z_con = state.z_concepts
        dx_vo = dx_vo + dp_cv @ z_con
        dx_ov = dx_ov + dp_co @ z_con
        dz_con = dp_cv.T @ x_vo + dp_co.T @ x_ov

    x_v, x_o = c["x_v"], c["x_o"]
    k = x_v.shape[1]
    dx_v_g, dcat_vo, dw1_vo, dw2_vo = _gate_backward(dx_vo, x_vo, c["c_vo"], x_v)
    dx_o_g, dcat_ov, dw1_ov, dw2_ov = _gate_backward(dx_ov, x_ov, c["c_ov"], x_o)

    dx_v = dx_v_g + dcat_vo[:, :k] + dcat_ov[:, k:]
    dx_o = dx_o_g + dcat_ov[:, :k] + dcat_vo[:, k:]

    du_v = _rows_unit_backward(dx_v, x_v, c["n_v"])
    du_o = _rows_unit_backward(dx_o, x_o, c["n_o"])
    du_cls = _rows_unit_backward(dz_class, z_class, c["n_cls"])

    grads = {
        "w_video": du_v.T @ batch.video_features,
        "b_video": du_v.sum(axis=0),
        "w_class": du_o.T @ batch.video_concept_pools
                   + du_cls.T @ batch.class_pools,
        "b_class": du_o.sum(axis=0) + du_cls.sum(axis=0),
        "w1_vo": dw1_vo, "w2_vo": dw2_vo,
        "w1_ov": dw1_ov, "w2_ov": dw2_ov,
    }
    if dz_con is not None:
        du_con = _rows_unit_backward(dz_con, state.z_concepts, c["n_con"])
        grads["w_class"] += du_con.T @ batch.concept_pools
        grads["b_class"] += du_con.sum(axis=0)
    return grads


def loss_and_grads(model: JointModel, batch: Batch, tau: float,
                   er_weight: float = 1.0, average_heads: bool = False):
    state = forward(model, batch, tau, er_weight, average_heads)
    grads = backward(model, batch, state)
    return state, grads


def embed_batch(model: JointModel, video_features: np.ndarray,
                video_concept_pools: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched inference-path video embeddings (no loss bookkeeping)."""
    u_v = video_features @ model.w_video.T + model.b_video
    x_v, _ = _rows_unit(u_v)
    u_o = video_concept_pools @ model.w_class.T + model.b_class
    x_o, _ = _rows_unit(u_o)
    x_vo, _ = _gate_forward(x_v, x_o, model.w1_vo, model.w2_vo)
    x_ov, _ = _gate_forward(x_o, x_v, model.w1_ov, model.w2_ov)
    return x_vo, x_ov


def class_matrix(model: JointModel, class_pools: np.ndarray) -> np.ndarray:
    """Unit class embeddings, one row per class."""
    u = class_pools @ model.w_class.T + model.b_class
    z, _ = _rows_unit(u)
    return z
