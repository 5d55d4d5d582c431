"""Class and concept text embedding: the shared map from a description to a
unit vector in the joint semantic space.

A description is a subject name concatenated with a sentence definition
("clean and jerk : a two - movement weightlifting exercise ..."). Token
vectors come from a pluggable encoder; the default is a deterministic
hashed-vocabulary table so the whole pipeline runs without any pretrained
model. Pooled token vectors go through one learned linear projection and are
L2-normalized. Action classes and object concepts share this map and its
parameters.
"""

from __future__ import annotations

import hashlib
import json
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import DegenerateEmbeddingError, MalformedInputError, TruncationWarning

# Reserved joiner placed between descriptions when several concepts are
# embedded as one sequence. Whitespace tokenization keeps it a single token.
SEPARATOR_TOKEN = "[sep]"

_WS = re.compile(r"\s+")

# unit() treats vectors whose norm is already this close to 1 as fixed points.
# The recomputed norm of a freshly normalized float64 vector deviates by at
# most ~K*eps (< 1e-12 for K <= 4096), so renormalization chains are
# bit-stable while the 1e-6 norm contract is untouched.
_UNIT_TOL = 1e-12


def normalize_whitespace(text: str) -> str:
    return _WS.sub(" ", text).strip()


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization; description files are pre-tokenized text."""
    return normalize_whitespace(text).split(" ") if normalize_whitespace(text) else []


def unit(v: np.ndarray) -> np.ndarray:
    """L2-normalize, raising instead of dividing by zero.

    Inputs already within _UNIT_TOL of unit length are returned unchanged so
    unit(unit(x)) == unit(x) bitwise.
    """
    v = np.asarray(v, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if not np.isfinite(n) or n == 0.0:
        raise DegenerateEmbeddingError(
            f"cannot normalize vector with norm {n!r}")
    if abs(n - 1.0) <= _UNIT_TOL:
        return v
    return v / n


def unit_rows(a: np.ndarray) -> np.ndarray:
    """Row-wise unit(); used on batched embeddings."""
    a = np.asarray(a, dtype=np.float64)
    norms = np.linalg.norm(a, axis=1)
    if not np.all(np.isfinite(norms)) or np.any(norms == 0.0):
        raise DegenerateEmbeddingError("row with zero or non-finite norm")
    scale = np.where(np.abs(norms - 1.0) <= _UNIT_TOL, 1.0, norms)
    return a / scale[:, None]


@dataclass(frozen=True)
class Description:
    """A subject (action class or object concept) with its sentence text."""

    subject_id: str
    name: str
    body: str
    token_count: int = field(init=False)

    def __post_init__(self):
        body = normalize_whitespace(self.body)
        if not body:
            raise MalformedInputError(
                f"description body for {self.subject_id!r} is empty")
        object.__setattr__(self, "body", body)
        object.__setattr__(self, "name", normalize_whitespace(self.name))
        object.__setattr__(self, "token_count", len(tokenize(body)))


def save_descriptions(descriptions: Sequence[Description], path: str | Path) -> None:
    """One JSON record per line: subject_id, name, body. UTF-8."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for d in descriptions:
            fh.write(json.dumps(
                {"subject_id": d.subject_id, "name": d.name, "body": d.body},
                ensure_ascii=False) + "\n")


def load_descriptions(path: str | Path) -> list[Description]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                out.append(Description(rec["subject_id"], rec["name"], rec["body"]))
            except (json.JSONDecodeError, KeyError) as exc:
                raise MalformedInputError(
                    f"{path}:{lineno}: bad description record: {exc}") from exc
    return out


class TokenEncoder(Protocol):
    """Anything that turns a token list into per-token hidden vectors."""

    encoder_id: str
    hidden_dim: int
    trainable_depth: int
    max_tokens: int

    def encode(self, tokens: Sequence[str]) -> np.ndarray: ...


class HashedTokenEncoder:
    """Deterministic stand-in for a pretrained sentence encoder.

    Each distinct token maps to a fixed mean-zero gaussian vector seeded from
    a stable hash of the token text, so embeddings are reproducible across
    processes and never depend on training. trainable_depth is always 0.
    """

    def __init__(self, hidden_dim: int = 64, max_tokens: int = 256,
                 encoder_id: str = "hashed-toy"):
        if hidden_dim <= 0:
            raise MalformedInputError("hidden_dim must be positive")
        self.encoder_id = encoder_id
        self.hidden_dim = hidden_dim
        self.trainable_depth = 0
        self.max_tokens = max_tokens
        self._cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            seed = int.from_bytes(digest, "little")
            rng = np.random.Generator(np.random.PCG64(seed))
            vec = rng.standard_normal(self.hidden_dim)
            vec.setflags(write=False)
            self._cache[token] = vec
        return vec

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            raise MalformedInputError("cannot encode an empty token sequence")
        return np.stack([self._token_vector(t) for t in tokens])


def encode_tokens(description: Description, encoder: TokenEncoder) -> np.ndarray:
    """Per-token hidden states for a description, truncating over-long text."""
    tokens = tokenize(description.body)
    if not tokens:
        raise MalformedInputError(
            f"description {description.subject_id!r} tokenizes to nothing")
    if len(tokens) > encoder.max_tokens:
        warnings.warn(
            f"description {description.subject_id!r}: {len(tokens)} tokens "
            f"truncated to {encoder.max_tokens}", TruncationWarning,
            stacklevel=2)
        tokens = tokens[:encoder.max_tokens]
    return encoder.encode(tokens)


def sentence_pool(hidden: np.ndarray) -> np.ndarray:
    """Arithmetic mean over token vectors."""
    hidden = np.asarray(hidden, dtype=np.float64)
    if hidden.ndim != 2 or hidden.shape[0] == 0:
        raise MalformedInputError("sentence_pool needs a non-empty (N, H) array")
    return hidden.mean(axis=0)


def pooled_feature(description: Description, encoder: TokenEncoder) -> np.ndarray:
    return sentence_pool(encode_tokens(description, encoder))


def project_unit(pooled: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    return unit(weight @ pooled + bias)


def embed_class(description: Description, encoder: TokenEncoder,
                weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Unit-norm class embedding of one description."""
    return project_unit(pooled_feature(description, encoder), weight, bias)


def concatenate_descriptions(descriptions: Sequence[Description]) -> Description:
    """Join several descriptions into one body with the reserved separator."""
    if not descriptions:
        raise MalformedInputError("no descriptions to concatenate")
    body = f" {SEPARATOR_TOKEN} ".join(d.body for d in descriptions)
    joined_id = "+".join(d.subject_id for d in descriptions)
    joined_name = "; ".join(d.name for d in descriptions)
    return Description(joined_id, joined_name, body)


def embed_concept_sequence(descriptions: Sequence[Description],
                           encoder: TokenEncoder,
                           weight: np.ndarray, bias: np.ndarray,
                           max_concepts: int = 16) -> np.ndarray:
    """Embed an ordered list of concept descriptions as one text.

    Routes through the same projection parameters as embed_class so concept
    and class embeddings live in one space.
    """
    if not descriptions:
        raise MalformedInputError("concept sequence is empty")
    if len(descriptions) > max_concepts:
        raise MalformedInputError(
            f"{len(descriptions)} concepts exceeds max_concepts={max_concepts}")
    return embed_class(concatenate_descriptions(descriptions), encoder, weight, bias)
