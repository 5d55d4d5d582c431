"""Learned parameters of the joint embedding model and their persistence.

All tensors are float64 numpy arrays so analytic gradients can be checked
against finite differences at tight tolerance. A checkpoint is an .npz with
the tensors plus a JSON sidecar echoing the config and seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MalformedInputError
from .text_embed import HashedTokenEncoder, TokenEncoder

PARAM_NAMES = (
    "w_class", "b_class", "w_video", "b_video",
    "w1_vo", "w2_vo", "w1_ov", "w2_ov",
)


@dataclass
class JointModel:
    """Projections and gate weights for the text and video streams."""

    w_class: np.ndarray   # (K, hidden_dim)
    b_class: np.ndarray   # (K,)
    w_video: np.ndarray   # (K, d_st)
    b_video: np.ndarray   # (K,)
    w1_vo: np.ndarray     # (K, 2K)
    w2_vo: np.ndarray     # (K, K)
    w1_ov: np.ndarray     # (K, 2K)
    w2_ov: np.ndarray     # (K, K)
    encoder: TokenEncoder = field(default_factory=HashedTokenEncoder)

    def __post_init__(self):
        self.validate()

    @property
    def embed_dim(self) -> int:
        return self.w_class.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w_class.shape[1]

    @property
    def d_st(self) -> int:
        return self.w_video.shape[1]

    def validate(self) -> None:
        k, h = self.w_class.shape
        if self.b_class.shape != (k,) or self.b_video.shape != (k,):
            raise MalformedInputError("bias shapes inconsistent with K")
        if self.w_video.shape[0] != k:
            raise MalformedInputError("w_video rows must equal K")
        for name in ("w1_vo", "w1_ov"):
            if getattr(self, name).shape != (k, 2 * k):
                raise MalformedInputError(f"{name} must be (K, 2K)")
        for name in ("w2_vo", "w2_ov"):
            if getattr(self, name).shape != (k, k):
                raise MalformedInputError(f"{name} must be (K, K)")
        for name in PARAM_NAMES:
            if not np.all(np.isfinite(getattr(self, name))):
                raise MalformedInputError(f"{name} has non-finite entries")

    def params(self) -> dict[str, np.ndarray]:
        """Live references to every trainable tensor, in a fixed order."""
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "JointModel":
        kwargs = {name: getattr(self, name).copy() for name in PARAM_NAMES}
        return JointModel(encoder=self.encoder, **kwargs)

    @classmethod
    def create(cls, embed_dim: int = 512, hidden_dim: int = 64,
               d_st: int = 2048, seed: int = 0,
               encoder: TokenEncoder | None = None) -> "JointModel":
        """Fan-in scaled gaussian init; gates start near the identity regime."""
        rng = np.random.default_rng(seed)
        k = embed_dim

        def w(rows, cols):
            return rng.standard_normal((rows, cols)) / np.sqrt(cols)

        enc = encoder if encoder is not None else HashedTokenEncoder(hidden_dim)
        return cls(
            w_class=w(k, enc.hidden_dim),
            b_class=np.zeros(k),
            w_video=w(k, d_st),
            b_video=np.zeros(k),
            w1_vo=0.1 * w(k, 2 * k),
            w2_vo=0.1 * w(k, k),
            w1_ov=0.1 * w(k, 2 * k),
            w2_ov=0.1 * w(k, k),
            encoder=enc,
        )

    def save(self, path: str | Path, meta: dict | None = None) -> None:
        path = Path(path)
        np.savez(path, **self.params())
        sidecar = dict(meta or {})
        sidecar.setdefault("encoder_id", self.encoder.encoder_id)
        sidecar.setdefault("hidden_dim", self.hidden_dim)
        sidecar.setdefault("embed_dim", self.embed_dim)
        sidecar.setdefault("d_st", self.d_st)
        path.with_suffix(".json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, encoder: TokenEncoder | None = None) -> "JointModel":
        path = Path(path)
        with np.load(path) as data:
            tensors = {name: np.asarray(data[name], dtype=np.float64)
                       for name in PARAM_NAMES}
        if encoder is None:
            hidden = tensors["w_class"].shape[1]
            encoder = HashedTokenEncoder(hidden)
        return cls(encoder=encoder, **tensors)

    @classmethod
    def load_meta(cls, path: str | Path) -> dict:
        sidecar = Path(path).with_suffix(".json")
        if not sidecar.exists():
            return {}
        return json.loads(sidecar.read_text(encoding="utf-8"))
