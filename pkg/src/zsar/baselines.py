"""Reference zero-shot baselines sharing the evaluation harness: bilinear
compatibility models with ranking objectives (pairwise, weighted-approximate,
hard-negative), a class-to-visual regression model, and the closed-form
ridge-style solver.

Class features are L2-normalized mean-pooled token vectors of class names by
default (a switch accepts full description bodies instead). Video features
are the raw spatio-temporal vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, NumericError
from .evaluation import SplitMetrics, evaluate_rankings, rank_classes
from .text_embed import Description, TokenEncoder, sentence_pool, tokenize, unit
from .trainer import lr_at

RANKING_METHODS = ("devise", "ale", "sje")
METHODS = RANKING_METHODS + ("dem", "eszsl")


def class_features(descriptions: list[Description], encoder: TokenEncoder,
                   use_body: bool = False) -> np.ndarray:
    """Unit mean-pooled token vectors of class names (or bodies)."""
    rows = []
    for d in descriptions:
        text = d.body if use_body else d.name
        rows.append(unit(sentence_pool(encoder.encode(tokenize(text)))))
    return np.stack(rows)


def ale_weights(n_classes: int) -> np.ndarray:
    """Prefix sums of the 1/i rank penalties, index r -> l_r."""
    alpha = 1.0 / np.arange(1, n_classes + 1)
    return np.concatenate([[0.0], np.cumsum(alpha)])


@dataclass
class BilinearModel:
    """Compatibility F(v, y) = phi(v)^T W psi(y) with a hinge objective."""

    weight: np.ndarray          # (d_video, d_class)
    method: str = "devise"
    margin: float = 0.2

    def __post_init__(self):
        if self.method not in RANKING_METHODS:
            raise InvalidArgumentError(
                f"method must be one of {RANKING_METHODS}, got {self.method!r}")

    def scores(self, video_features: np.ndarray,
               class_feats: np.ndarray) -> np.ndarray:
        return video_features @ self.weight @ class_feats.T

    def loss_and_grad(self, video_features: np.ndarray, labels: np.ndarray,
                      class_feats: np.ndarray) -> tuple[float, np.ndarray]:
        scores = self.scores(video_features, class_feats)
        l_prefix = ale_weights(class_feats.shape[0]) if self.method == "ale" else None
        losses, dscores = kernels.ranking_loss_rows(
            scores, labels, self.margin, self.method, l_prefix)
        n = video_features.shape[0]
        dw = video_features.T @ dscores @ class_feats / n
        return float(losses.mean()), dw


def devise_step(video_features, labels, class_feats, weight, margin=0.2):
    m = BilinearModel(weight, "devise", margin)
    return m.loss_and_grad(video_features, labels, class_feats)


def ale_step(video_features, labels, class_feats, weight, margin=0.2):
    m = BilinearModel(weight, "ale", margin)
    return m.loss_and_grad(video_features, labels, class_feats)


def sje_step(video_features, labels, class_feats, weight, margin=0.2):
    m = BilinearModel(weight, "sje", margin)
    return m.loss_and_grad(video_features, labels, class_feats)


@dataclass
class DemModel:
    """Two-layer map from class space into visual space, trained by MSE."""

    w1: np.ndarray              # (d_mid, d_class)
    w2: np.ndarray              # (d_video, d_mid)
    reg: float = 1e-3

    def class_prototypes(self, class_feats: np.ndarray) -> np.ndarray:
        hidden = np.maximum(class_feats @ self.w1.T, 0.0)
        return np.maximum(hidden @ self.w2.T, 0.0)

    def scores(self, video_features: np.ndarray,
               class_feats: np.ndarray) -> np.ndarray:
        protos = self.class_prototypes(class_feats)
        d2 = ((video_features[:, None, :] - protos[None, :, :]) ** 2).sum(axis=2)
        return -d2

    def loss_and_grad(self, video_features: np.ndarray, labels: np.ndarray,
                      class_feats: np.ndarray):
        psi = class_feats[labels]
        h_pre = psi @ self.w1.T
        h = np.maximum(h_pre, 0.0)
        f_pre = h @ self.w2.T
        f = np.maximum(f_pre, 0.0)
        resid = f - video_features
        n = video_features.shape[0]
        loss = float((resid ** 2).sum() / n
                     + self.reg * ((self.w1 ** 2).sum() + (self.w2 ** 2).sum()))
        df = 2.0 * resid / n
        df_pre = df * (f_pre > 0.0)
        dw2 = df_pre.T @ h + 2.0 * self.reg * self.w2
        dh = df_pre @ self.w2
        dh_pre = dh * (h_pre > 0.0)
        dw1 = dh_pre.T @ psi + 2.0 * self.reg * self.w1
        return loss, dw1, dw2


def dem_step(video_features, labels, class_feats, w1, w2, reg=1e-3):
    return DemModel(w1, w2, reg).loss_and_grad(video_features, labels, class_feats)


def eszsl_objective(weight, video_features, targets, class_feats,
                    gamma, lam) -> float:
    """The regularized squared-loss objective the closed form minimizes."""
    fit = video_features @ weight @ class_feats.T - targets
    return float(
        (fit ** 2).sum()
        + gamma * ((weight @ class_feats.T) ** 2).sum()
        + lam * ((video_features @ weight) ** 2).sum()
        + gamma * lam * (weight ** 2).sum())


def eszsl_solve(video_features: np.ndarray, labels: np.ndarray,
                class_feats: np.ndarray, gamma: float, lam: float) -> np.ndarray:
    """Closed-form bilinear weights for the squared-loss ranking objective.

    Targets are +1 for the true class and -1 elsewhere. Raises NumericError
    with the offending condition number if a regularized Gram matrix is
    effectively singular.
    """
    if gamma <= 0 or lam <= 0:
        raise InvalidArgumentError("gamma and lam must be positive")
    n, d = video_features.shape
    s, a = class_feats.shape
    targets = -np.ones((n, s))
    targets[np.arange(n), labels] = 1.0
    gram_v = video_features.T @ video_features + gamma * np.eye(d)
    gram_c = class_feats.T @ class_feats + lam * np.eye(a)
    for name, gram in (("video", gram_v), ("class", gram_c)):
        cond = np.linalg.cond(gram)
        if not np.isfinite(cond) or cond > 1e12:
            raise NumericError(
                f"regularized {name} Gram matrix is ill-conditioned "
                f"(condition number {cond:.3e})")
    rhs = video_features.T @ targets @ class_feats
    return np.linalg.solve(gram_v, rhs) @ np.linalg.inv(gram_c)


@dataclass
class BaselineTrainConfig:
    epochs: int = 200
    base_lr: float = 0.01
    warmup_fraction: float = 0.1
    batch_size: int = 64
    seed: int = 0
    margin: float = 0.2
    dem_mid_dim: int = 64
    dem_reg: float = 1e-3
    eszsl_gamma: float = 1.0
    eszsl_lam: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8


def train_baseline(method: str, video_features: np.ndarray,
                   labels: np.ndarray, class_feats: np.ndarray,
                   config: BaselineTrainConfig | None = None):
    """Fit one baseline on seen-class data; returns the scoring closure."""
    cfg = config or BaselineTrainConfig()
    if method not in METHODS:
        raise InvalidArgumentError(
            f"unknown baseline {method!r}; choose from {METHODS}")
    rng = np.random.default_rng(cfg.seed)
    n, d = video_features.shape
    a = class_feats.shape[1]

    if method == "eszsl":
        w = eszsl_solve(video_features, labels, class_feats,
                        cfg.eszsl_gamma, cfg.eszsl_lam)
        return lambda feats, cls: feats @ w @ cls.T, {"weight": w}

    if method == "dem":
        model = DemModel(
            w1=rng.standard_normal((cfg.dem_mid_dim, a)) / np.sqrt(a),
            w2=rng.standard_normal((d, cfg.dem_mid_dim)) / np.sqrt(cfg.dem_mid_dim),
            reg=cfg.dem_reg)
        state = [np.zeros_like(model.w1), np.zeros_like(model.w1),
                 np.zeros_like(model.w2), np.zeros_like(model.w2)]
        total = cfg.epochs * max(1, -(-n // cfg.batch_size))
        t = 0
        for _ in range(cfg.epochs):
            perm = rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                rows = perm[start:start + cfg.batch_size]
                _, dw1, dw2 = model.loss_and_grad(
                    video_features[rows], labels[rows], class_feats)
                lr = lr_at(t, total, cfg.base_lr, cfg.warmup_fraction)
                t += 1
                kernels.adam_step(model.w1.reshape(-1), dw1.reshape(-1),
                                  state[0].reshape(-1), state[1].reshape(-1),
                                  t, lr, cfg.beta1, cfg.beta2, cfg.adam_eps, 0.0)
                kernels.adam_step(model.w2.reshape(-1), dw2.reshape(-1),
                                  state[2].reshape(-1), state[3].reshape(-1),
                                  t, lr, cfg.beta1, cfg.beta2, cfg.adam_eps, 0.0)
        return model.scores, {"w1": model.w1, "w2": model.w2}

    bilinear = BilinearModel(
        weight=rng.standard_normal((d, a)) / np.sqrt(d),
        method=method, margin=cfg.margin)
    m_buf = np.zeros_like(bilinear.weight)
    v_buf = np.zeros_like(bilinear.weight)
    total = cfg.epochs * max(1, -(-n // cfg.batch_size))
    t = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            rows = perm[start:start + cfg.batch_size]
            _, dw = bilinear.loss_and_grad(
                video_features[rows], labels[rows], class_feats)
            lr = lr_at(t, total, cfg.base_lr, cfg.warmup_fraction)
            t += 1
            kernels.adam_step(bilinear.weight.reshape(-1),
                              np.ascontiguousarray(dw.reshape(-1)),
                              m_buf.reshape(-1), v_buf.reshape(-1),
                              t, lr, cfg.beta1, cfg.beta2, cfg.adam_eps, 0.0)
    return bilinear.scores, {"weight": bilinear.weight}


def evaluate_baseline(score_fn, video_features: np.ndarray,
                      labels: np.ndarray, class_feats: np.ndarray,
                      class_names: list[str] | None = None) -> SplitMetrics:
    scores = score_fn(video_features, class_feats)
    return evaluate_rankings(rank_classes(scores), labels, class_names)
