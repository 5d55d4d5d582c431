import numpy as np
import pytest

from zsar.model import JointModel
from zsar.text_embed import Description, HashedTokenEncoder
from zsar.video_embed import ConceptVocabulary


@pytest.fixture
def encoder8():
    return HashedTokenEncoder(hidden_dim=8)


@pytest.fixture
def small_model(encoder8):
    return JointModel.create(embed_dim=4, hidden_dim=8, d_st=6, seed=3,
                             encoder=encoder8)


@pytest.fixture
def tiny_vocab():
    concepts = tuple(
        Description(f"c{i:03d}", f"object{i:02d}",
                    f"object{i:02d} : a prop known as word{i:02d} marked by tag{i:02d}")
        for i in range(3))
    return ConceptVocabulary(concepts)


def scalar_norm(v):
    """Scalar-loop L2 norm, independent of numpy reductions."""
    acc = 0.0
    for x in v:
        acc += float(x) * float(x)
    return acc ** 0.5


def scalar_dot(a, b):
    acc = 0.0
    for x, y in zip(a, b):
        acc += float(x) * float(y)
    return acc


@pytest.fixture
def rng():
    return np.random.default_rng(0)
