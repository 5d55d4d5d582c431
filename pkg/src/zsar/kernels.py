"""Hot numeric kernels with two interchangeable backends.

The inner loops that dominate training time (row-wise contrastive loss with
gradient, fused Adam updates, hinge ranking losses) are implemented twice:
once as plain vectorized numpy and once as numba @njit loops. The active
backend is chosen at import time from the ZSAR_BACKEND environment variable:

    ZSAR_BACKEND=auto    numba when importable, else numpy (default)
    ZSAR_BACKEND=numba   require numba, fail loudly if missing
    ZSAR_BACKEND=numpy   force the pure-numpy path

Both variants stay importable (``xent_rows_numpy`` / ``xent_rows_numba``) so
parity tests and benchmarks/compare_backends.py can run them side by side.
Results agree to ~1e-12 (summation order differs between backends).
"""

from __future__ import annotations

import os

import numpy as np

_MODES = {"devise": 0, "ale": 1, "sje": 2}


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def xent_rows_numpy(p: np.ndarray, q: np.ndarray, inv_tau: float):
    """Per-row contrastive cross-entropy and its gradient.

    loss_i = -(1/sum_j q_ij) * sum_j q_ij * log softmax(p_i * inv_tau)_j,
    computed with max subtraction. Rows of q must have at least one positive
    (validated by callers).
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = p.max(axis=1, keepdims=True)
    e = np.exp((p - m) * inv_tau)
    s = e.sum(axis=1, keepdims=True)
    log_softmax = (p - m) * inv_tau - np.log(s)
    qsum = q.sum(axis=1, keepdims=True)
    losses = -(q * log_softmax).sum(axis=1) / qsum[:, 0]
    dp = (e / s) * inv_tau - q * (inv_tau / qsum)
    return losses, dp


def adam_step_numpy(param, grad, m, v, t, lr, beta1, beta2, eps, weight_decay):
    """One fused Adam update, in place on flat float64 arrays."""
    g = grad + weight_decay * param
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    param -= lr * mhat / (np.sqrt(vhat) + eps)


def ranking_loss_rows_numpy(scores, label_idx, margin, mode, l_prefix):
    """Hinge ranking losses over a compatibility score matrix.

    scores: (N, S) bilinear compatibilities, label_idx: true class per row.
    mode 0 sums hinge violations, mode 1 weights the row by l_r / r where r
    counts violating wrong classes, mode 2 keeps only the hardest violation.
    Returns per-row losses and d(loss)/d(scores).
    """
    scores = np.asarray(scores, dtype=np.float64)
    n, s = scores.shape
    losses = np.zeros(n)
    dscores = np.zeros_like(scores)
    rows = np.arange(n)
    true_scores = scores[rows, label_idx]
    hinge = margin + scores - true_scores[:, None]
    hinge[rows, label_idx] = 0.0
    if mode == 0:
        pos = hinge > 0.0
        losses = np.where(pos, hinge, 0.0).sum(axis=1)
        dscores[pos] = 1.0
        dscores[rows, label_idx] -= pos.sum(axis=1)
    elif mode == 1:
        pos = hinge > 0.0
        viol = hinge >= 0.0
        viol[rows, label_idx] = False
        r = viol.sum(axis=1)
        w = np.where(r > 0, l_prefix[r] / np.maximum(r, 1), 0.0)
        losses = w * np.where(pos, hinge, 0.0).sum(axis=1)
        dscores = np.where(pos, w[:, None], 0.0)
        dscores[rows, label_idx] -= w * pos.sum(axis=1)
    else:
        j = hinge.argmax(axis=1)
        best = hinge[rows, j]
        active = best > 0.0
        losses = np.where(active, best, 0.0)
        dscores[rows[active], j[active]] = 1.0
        dscores[rows[active], label_idx[active]] -= 1.0
    return losses, dscores


# ---------------------------------------------------------------------------
# numba variants: same loops, jitted
# ---------------------------------------------------------------------------

def _build_numba_kernels():
    from numba import njit

    @njit(cache=True)
    def xent_rows_nb(p, q, inv_tau):
        n, c = p.shape
        losses = np.empty(n)
        dp = np.empty((n, c))
        for i in range(n):
            m = p[i, 0]
            for j in range(1, c):
                if p[i, j] > m:
                    m = p[i, j]
            s = 0.0
            for j in range(c):
                s += np.exp((p[i, j] - m) * inv_tau)
            log_s = np.log(s)
            qsum = 0.0
            for j in range(c):
                qsum += q[i, j]
            acc = 0.0
            for j in range(c):
                ls = (p[i, j] - m) * inv_tau - log_s
                acc += q[i, j] * ls
                dp[i, j] = (np.exp((p[i, j] - m) * inv_tau) / s) * inv_tau \
                    - q[i, j] * inv_tau / qsum
            losses[i] = -acc / qsum
        return losses, dp

    @njit(cache=True)
    def adam_step_nb(param, grad, m, v, t, lr, beta1, beta2, eps, weight_decay):
        bc1 = 1.0 - beta1 ** t
        bc2 = 1.0 - beta2 ** t
        for i in range(param.shape[0]):
            g = grad[i] + weight_decay * param[i]
            m[i] = beta1 * m[i] + (1.0 - beta1) * g
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
            param[i] -= lr * (m[i] / bc1) / (np.sqrt(v[i] / bc2) + eps)

    @njit(cache=True)
    def ranking_loss_rows_nb(scores, label_idx, margin, mode, l_prefix):
        n, s = scores.shape
        losses = np.zeros(n)
        dscores = np.zeros((n, s))
        for i in range(n):
            y = label_idx[i]
            ft = scores[i, y]
            if mode == 2:
                best = 0.0
                bj = -1
                for j in range(s):
                    if j == y:
                        continue
                    h = margin + scores[i, j] - ft
                    if h > best:
                        best = h
                        bj = j
                if bj >= 0:
                    losses[i] = best
                    dscores[i, bj] += 1.0
                    dscores[i, y] -= 1.0
                continue
            r = 0
            if mode == 1:
                for j in range(s):
                    if j == y:
                        continue
                    if margin + scores[i, j] - ft >= 0.0:
                        r += 1
                if r == 0:
                    continue
            w = 1.0 if mode == 0 else l_prefix[r] / r
            acc = 0.0
            npos = 0
            for j in range(s):
                if j == y:
                    continue
                h = margin + scores[i, j] - ft
                if h > 0.0:
                    acc += h
                    dscores[i, j] += w
                    npos += 1
            losses[i] = w * acc
            dscores[i, y] -= w * npos
        return losses, dscores

    return xent_rows_nb, adam_step_nb, ranking_loss_rows_nb


_env = os.environ.get("ZSAR_BACKEND", "auto").strip().lower()
if _env not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"ZSAR_BACKEND must be one of auto/numba/numpy, got {_env!r}")

xent_rows_numba = None
adam_step_numba = None
ranking_loss_rows_numba = None

if _env in ("auto", "numba"):
    try:
        (xent_rows_numba, adam_step_numba,
         ranking_loss_rows_numba) = _build_numba_kernels()
        _BACKEND = "numba"
    except ImportError:
        if _env == "numba":
            raise
        _BACKEND = "numpy"
else:
    _BACKEND = "numpy"

if _BACKEND == "numba":
    xent_rows = xent_rows_numba
    adam_step = adam_step_numba
    _ranking_loss_rows_impl = ranking_loss_rows_numba
else:
    xent_rows = xent_rows_numpy
    adam_step = adam_step_numpy
    _ranking_loss_rows_impl = ranking_loss_rows_numpy


def ranking_loss_rows(scores, label_idx, margin, mode, l_prefix=None):
    """Dispatching wrapper; ``mode`` may be a name ('devise'/'ale'/'sje')."""
    if isinstance(mode, str):
        mode = _MODES[mode]
    if l_prefix is None:
        l_prefix = np.zeros(scores.shape[1] + 1)
    label_idx = np.ascontiguousarray(label_idx, dtype=np.int64)
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    l_prefix = np.ascontiguousarray(l_prefix, dtype=np.float64)
    return _ranking_loss_rows_impl(scores, label_idx, float(margin), mode, l_prefix)


def active_backend() -> str:
    """Name of the backend the dispatch functions run on."""
    return _BACKEND
