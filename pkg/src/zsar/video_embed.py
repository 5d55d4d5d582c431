"""Video embedding: a spatio-temporal stream and an object-text stream fused
by channel gates into the pair of vectors used for recognition.

Videos arrive as precomputed features: one pooled spatio-temporal vector per
clip plus per-frame object probabilities over a concept vocabulary. The
object stream never touches the raw probabilities beyond ranking: the top
concepts' descriptions are embedded through the shared text map, which keeps
both streams in one semantic space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, MalformedInputError
from .model import JointModel
from .text_embed import (Description, TokenEncoder, embed_concept_sequence,
                         unit)


@dataclass(frozen=True)
class FeatureRecord:
    """Precomputed features for one video clip."""

    video_id: str
    st_feature: np.ndarray        # (d_st,) float
    frame_object_probs: np.ndarray  # (frames, vocab) rows in [0, 1]
    label: str | None = None

    def __post_init__(self):
        st = np.asarray(self.st_feature, dtype=np.float64)
        probs = np.asarray(self.frame_object_probs, dtype=np.float64)
        if st.ndim != 1 or not np.all(np.isfinite(st)):
            raise MalformedInputError(
                f"{self.video_id}: st_feature must be a finite 1-D vector")
        if probs.ndim != 2:
            raise MalformedInputError(
                f"{self.video_id}: frame_object_probs must be (frames, vocab)")
        if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
            raise MalformedInputError(
                f"{self.video_id}: object probabilities outside [0, 1]")
        object.__setattr__(self, "st_feature", st)
        object.__setattr__(self, "frame_object_probs", probs)


@dataclass(frozen=True)
class ConceptVocabulary:
    """Ordered object concepts; index in the list is the concept id."""

    concepts: tuple[Description, ...]

    def __post_init__(self):
        ids = [c.subject_id for c in self.concepts]
        if len(set(ids)) != len(ids):
            raise MalformedInputError("concept ids must be unique")
        object.__setattr__(self, "concepts", tuple(self.concepts))

    def __len__(self) -> int:
        return len(self.concepts)

    def description(self, concept_id: int) -> Description:
        return self.concepts[concept_id]


def embed_st(record: FeatureRecord, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Project the pooled spatio-temporal feature into the joint space."""
    if record.st_feature.shape[0] != weight.shape[1]:
        raise MalformedInputError(
            f"{record.video_id}: st_feature length {record.st_feature.shape[0]} "
            f"does not match projection input {weight.shape[1]}")
    return unit(weight @ record.st_feature + bias)


def average_frame_probs(frame_object_probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(frame_object_probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise MalformedInputError("need at least one frame of probabilities")
    return probs.mean(axis=0)


def top_objects(record: FeatureRecord, vocab: ConceptVocabulary, n_objects: int) -> list[int]:
    """Concept ids ranked by frame-averaged probability, ties by id.

    The raw averaged values are kept as-is; they only rank concepts.
    """
    v = len(vocab)
    if record.frame_object_probs.shape[1] != v:
        raise MalformedInputError(
            f"{record.video_id}: prob columns {record.frame_object_probs.shape[1]} "
            f"!= vocabulary size {v}")
    if not 1 <= n_objects <= v:
        raise InvalidArgumentError(
            f"n_objects must be in [1, {v}], got {n_objects}")
    avg = average_frame_probs(record.frame_object_probs)
    order = np.lexsort((np.arange(v), -avg))
    return [int(i) for i in order[:n_objects]]


def embed_objects(record: FeatureRecord, vocab: ConceptVocabulary,
                  n_objects: int, encoder: TokenEncoder,
                  class_weight: np.ndarray, class_bias: np.ndarray) -> np.ndarray:
    """Object-stream embedding: top concepts' descriptions through the shared
    text map."""
    ids = top_objects(record, vocab, n_objects)
    descriptions = [vocab.description(i) for i in ids]
    return embed_concept_sequence(descriptions, encoder, class_weight, class_bias)


def sigmoid(a: np.ndarray) -> np.ndarray:
    """Numerically stable logistic, clipped into the open interval (0, 1).

    float64 sigmoid saturates to exactly 0.0/1.0 for |a| > ~37; the clip keeps
    gate activations strictly inside (0, 1) as the gating contract requires.
    """
    out = np.empty_like(a, dtype=np.float64)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    tiny = np.finfo(np.float64).tiny
    return np.clip(out, tiny, 1.0 - 2.0 ** -53)


def channel_gate(x_gated: np.ndarray, x_guide: np.ndarray,
                 w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    """Reweight x_gated's channels by a gate computed from both streams.

    g = sigmoid(w2 @ relu(w1 @ [x_gated; x_guide])), output is the
    renormalized x_gated * g. The gate vector is divided by its own maximum
    before use: the output is scale-invariant in g, and the ratio form makes
    a uniform gate (zero weights) an exact no-op bit for bit.
    """
    x_gated = np.asarray(x_gated, dtype=np.float64)
    x_guide = np.asarray(x_guide, dtype=np.float64)
    if x_gated.shape != x_guide.shape or x_gated.ndim != 1:
        raise MalformedInputError("gate inputs must be equal-length vectors")
    pre = w2 @ np.maximum(w1 @ np.concatenate([x_gated, x_guide]), 0.0)
    gate = sigmoid(pre)
    return unit(x_gated * (gate / gate.max()))


def embed_video(record: FeatureRecord, vocab: ConceptVocabulary,
                n_objects: int, model: JointModel) -> tuple[np.ndarray, np.ndarray]:
    """The two mutually-gated video embeddings (st-led, object-led)."""
    x_v = embed_st(record, model.w_video, model.b_video)
    x_o = embed_objects(record, vocab, n_objects, model.encoder,
                        model.w_class, model.b_class)
    x_vo = channel_gate(x_v, x_o, model.w1_vo, model.w2_vo)
    x_ov = channel_gate(x_o, x_v, model.w1_ov, model.w2_ov)
    return x_vo, x_ov
