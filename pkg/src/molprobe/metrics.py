"""Scalar evaluation metrics used by the probe harness.

All functions accept array-likes and compute in float64. Metrics that are
undefined on degenerate input (single-class labels, constant vectors) return
``None`` instead of raising, so callers can skip and report.
"""

from __future__ import annotations

import logging

import numpy as np

LOGGER = logging.getLogger(__name__)


def midranks(values) -> np.ndarray:
    """Fractional 1-based ranks; tied values share the mean of their positions."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.shape[0], dtype=np.float64)
    i = 0
    while i < v.shape[0]:
        j = i
        while j + 1 < v.shape[0] and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float | None:
    """Area under the ROC curve via the rank-sum identity.

    Ties in ``scores`` contribute 1/2, so a constant score vector gives
    exactly 0.5. Returns None when only one class is present.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = int(y.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        LOGGER.info("roc_auc undefined: single-class labels")
        return None
    ranks = midranks(s)
    rank_sum = float(ranks[pos].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def spearman(a, b) -> float | None:
    """Rank correlation: Pearson correlation of fractional midranks.

    None for fewer than two points or when either side has zero rank variance.
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise ValueError("length mismatch")
    if x.shape[0] < 2:
        return None
    rx = midranks(x)
    ry = midranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    vx = float(rx @ rx)
    vy = float(ry @ ry)
    if vx == 0.0 or vy == 0.0:
        return None
    return float(rx @ ry) / np.sqrt(vx * vy)


def mse(pred, target) -> float:
    """Mean squared error over every entry."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {t.shape}")
    d = p - t
    return float(np.mean(d * d))


def cross_entropy(logits, labels) -> float:
    """Mean cross-entropy from raw logits, log-sum-exp stabilised.

    1-D (or single-column) logits are a binary head scored against 0/1
    labels; an (n, k) matrix is a softmax head scored against integer class
    labels. Extreme logits stay finite, e.g. a confidently wrong score of
    1000 costs about 1000 nats rather than overflowing.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim == 2 and z.shape[1] == 1:
        z = z[:, 0]
    if z.ndim == 1:
        y = np.asarray(labels, dtype=np.float64)
        if y.shape != z.shape:
            raise ValueError("label shape mismatch")
        # softplus(z) - y*z, with softplus(z) = max(z, 0) + log1p(exp(-|z|))
        per = np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z)))
        return float(per.mean())
    if z.ndim != 2:
        raise ValueError("logits must be 1-D or 2-D")
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != z.shape[0]:
        raise ValueError("label shape mismatch")
    if y.min() < 0 or y.max() >= z.shape[1]:
        raise ValueError("class label out of range")
    zmax = z.max(axis=1)
    lse = zmax + np.log(np.exp(z - zmax[:, None]).sum(axis=1))
    picked = z[np.arange(z.shape[0]), y.astype(np.int64)]
    return float(np.mean(lse - picked))
