"""Synthetic desk-scale worlds with a planted link between class text and
video features.

Each world has a pool of object concepts with unique content words. A class
description mentions its concepts' words, so class text embeddings correlate
with concept text embeddings through shared tokens. A video's feature vector
is a fixed linear image of its class's concept-text mixture plus a
class-private nuisance direction and noise; its frame probabilities put most
mass on the class's true concepts. Transfer to unseen classes is possible
exactly to the extent a model routes through the shared concept semantics:
the nuisance direction predicts seen classes perfectly but carries nothing
about unseen ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .text_embed import Description, HashedTokenEncoder, TokenEncoder, pooled_feature
from .video_embed import ConceptVocabulary, FeatureRecord


@dataclass
class SynthWorld:
    seen: list[Description]
    unseen: list[Description]
    vocab: ConceptVocabulary
    train_records: list[FeatureRecord]      # seen classes
    test_records: list[FeatureRecord]       # unseen classes
    encoder: TokenEncoder
    d_st: int
    frames: int


def _concept_description(idx: int) -> Description:
    name = f"object{idx:02d}"
    body = f"{name} : a prop known as word{idx:02d} marked by tag{idx:02d}"
    return Description(f"c{idx:03d}", name, body)


def _class_description(idx: int, concept_ids: list[int]) -> Description:
    name = f"action{idx:02d}"
    words = " and ".join(f"word{j:02d} tag{j:02d}" for j in concept_ids)
    body = f"{name} : a staged activity performed with {words}"
    return Description(f"a{idx:03d}", name, body)


def make_world(n_seen: int = 10, n_unseen: int = 5, n_concepts: int = 24,
               concepts_per_class: int = 3, train_per_class: int = 20,
               test_per_class: int = 12, d_st: int = 64, frames: int = 4,
               hidden_dim: int = 48, shortcut: float = 0.0,
               noise: float = 0.1, seed: int = 0) -> SynthWorld:
    """Build a toy world.

    shortcut > 0 blends each video's feature toward a class-private random
    direction with a per-video weight drawn from U(0, shortcut). The
    direction predicts its (seen) class perfectly but is pure noise for
    transfer, so larger values reward models that keep decoding the shared
    concept channel.
    """
    rng = np.random.default_rng(seed)
    encoder = HashedTokenEncoder(hidden_dim)
    concepts = [_concept_description(i) for i in range(n_concepts)]
    vocab = ConceptVocabulary(tuple(concepts))
    concept_pools = np.stack([pooled_feature(c, encoder) for c in concepts])

    n_classes = n_seen + n_unseen
    assignments: list[list[int]] = []
    while len(assignments) < n_classes:
        combo = sorted(rng.choice(n_concepts, size=concepts_per_class,
                                  replace=False).tolist())
        # classes stay mutually distinguishable: any two share at most one concept
        if any(len(set(combo) & set(prev)) > 1 for prev in assignments):
            continue
        assignments.append(combo)
    classes = [_class_description(i, concept_ids)
               for i, concept_ids in enumerate(assignments)]
    seen, unseen = classes[:n_seen], classes[n_seen:]

    mix_map = rng.standard_normal((d_st, hidden_dim)) / np.sqrt(hidden_dim)
    nuisance = rng.standard_normal((n_classes, d_st))
    nuisance /= np.linalg.norm(nuisance, axis=1, keepdims=True)
    signal_scale = float(np.linalg.norm(
        mix_map @ concept_pools[assignments[0]].mean(axis=0)))

    def make_records(class_range, per_class, tag):
        records = []
        for ci in class_range:
            concept_ids = assignments[ci]
            mix = concept_pools[concept_ids].mean(axis=0)
            signal = mix_map @ mix
            for vi in range(per_class):
                w = rng.uniform(0.0, shortcut) if shortcut > 0 else 0.0
                st = ((1.0 - w) * signal
                      + w * signal_scale * nuisance[ci]
                      + noise * rng.standard_normal(d_st))
                raw = rng.uniform(0.0, 0.3, size=(frames, n_concepts))
                for j in concept_ids:
                    raw[:, j] = rng.uniform(3.0, 6.0, size=frames)
                probs = raw / raw.sum(axis=1, keepdims=True)
                records.append(FeatureRecord(
                    video_id=f"{tag}{ci:02d}v{vi:03d}", st_feature=st,
                    frame_object_probs=probs, label=classes[ci].subject_id))
        return records

    train_records = make_records(range(n_seen), train_per_class, "tr")
    test_records = make_records(range(n_seen, n_classes), test_per_class, "te")
    return SynthWorld(seen=seen, unseen=unseen, vocab=vocab,
                      train_records=train_records, test_records=test_records,
                      encoder=encoder, d_st=d_st, frames=frames)


def make_probe_data(n_classes: int = 5, train_per_class: int = 8,
                    test_per_class: int = 40, d: int = 32,
                    noise: float = 1.6, seed: int = 0):
    """Gaussian class clusters for the few-shot linear probe family.

    Returns (train_X, train_y, test_X, test_y); noise is sized so accuracy
    climbs with the number of shots instead of saturating at one.
    """
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((n_classes, d))
    means /= np.linalg.norm(means, axis=1, keepdims=True)

    def sample(per_class):
        xs, ys = [], []
        for c in range(n_classes):
            xs.append(means[c] + noise / np.sqrt(d)
                      * rng.standard_normal((per_class, d)))
            ys.extend([c] * per_class)
        return np.vstack(xs), np.asarray(ys, dtype=np.int64)

    train_x, train_y = sample(train_per_class)
    test_x, test_y = sample(test_per_class)
    return train_x, train_y, test_x, test_y


def take_shots(train_x: np.ndarray, train_y: np.ndarray, shots: int,
               n_classes: int, seed: int = 0):
    """First `shots` samples per class under a seeded shuffle."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(train_x.shape[0])
    xs, ys = [], []
    taken = {c: 0 for c in range(n_classes)}
    for i in order:
        c = int(train_y[i])
        if taken[c] < shots:
            taken[c] += 1
            xs.append(train_x[i])
            ys.append(c)
    return np.vstack(xs), np.asarray(ys, dtype=np.int64)
