"""Standalone differentiable losses used by the wider training recipes.

Two pieces: a margin hinge over triplet map distances (pulls same-class
feature maps together relative to cross-class ones) and a sigmoid
cross-entropy over a transformed pair distance (drives siamese distance
training).  Both come with analytic gradients that are verified against
central finite differences in :mod:`irisfuse.gradcheck`.
"""

from __future__ import annotations

import numpy as np


def _triplet_arrays(anchor, positive, negative):
    a = np.asarray(anchor, dtype=np.float64)
    p = np.asarray(positive, dtype=np.float64)
    n = np.asarray(negative, dtype=np.float64)
    if not (a.shape == p.shape == n.shape):
        raise ValueError(
            f"triplet shape mismatch: {a.shape}, {p.shape}, {n.shape}"
        )
    if a.ndim < 1:
        raise ValueError("triplet inputs need a leading batch axis")
    return a, p, n


def _squared_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = (x - y).reshape(x.shape[0], -1)
    return (d * d).sum(axis=1)


def triplet_margin_loss(anchor, positive, negative, margin: float) -> float:
    """Mean hinge on squared map distances over the leading batch axis.

    Per batch element: ``max(|positive - anchor|^2 - |negative - anchor|^2
    + margin, 0)`` where ``|.|`` is the Euclidean norm over all trailing
    axes.  A single triplet of maps is passed with batch shape (1, ...).
    """
    if margin < 0:
        raise ValueError(f"margin must be >= 0, got {margin}")
    a, p, n = _triplet_arrays(anchor, positive, negative)
    hinge = np.maximum(_squared_dists(p, a) - _squared_dists(n, a) + margin, 0.0)
    return float(hinge.mean())


def triplet_margin_loss_grads(anchor, positive, negative, margin: float):
    """Loss plus gradients w.r.t. anchor, positive and negative maps."""
    if margin < 0:
        raise ValueError(f"margin must be >= 0, got {margin}")
    a, p, n = _triplet_arrays(anchor, positive, negative)
    batch = a.shape[0]
    args = _squared_dists(p, a) - _squared_dists(n, a) + margin
    loss = float(np.maximum(args, 0.0).mean())
    active = (args > 0).astype(np.float64) / batch
    scale = active.reshape((batch,) + (1,) * (a.ndim - 1))
    grad_p = 2.0 * (p - a) * scale
    grad_n = -2.0 * (n - a) * scale
    grad_a = -grad_p - grad_n
    return loss, grad_a, grad_p, grad_n


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _distance_loss_arrays(s, t):
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if s.shape != t.shape:
        raise ValueError(f"shape mismatch: s {s.shape} vs t {t.shape}")
    if not np.isfinite(s).all():
        raise ValueError("non-finite transformed distance")
    if not np.isin(t, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    return s, t


def distance_sigmoid_loss(s, t) -> float:
    """Mean binary cross-entropy of ``sigmoid(s)`` against labels ``t``.

    ``s`` is a transformed pair distance (see :func:`distance_to_logit`)
    oriented so larger means more genuine; ``t`` is 1 for genuine pairs.
    Evaluated in softplus form, ``t*softplus(-s) + (1-t)*softplus(s)``,
    so it stays finite for any float input.
    """
    s, t = _distance_loss_arrays(s, t)
    loss = t * np.logaddexp(0.0, -s) + (1.0 - t) * np.logaddexp(0.0, s)
    return float(loss.mean())


def distance_sigmoid_loss_grad(s, t):
    """Loss plus gradient w.r.t. each transformed distance."""
    s, t = _distance_loss_arrays(s, t)
    loss = t * np.logaddexp(0.0, -s) + (1.0 - t) * np.logaddexp(0.0, s)
    grad = (sigmoid(s) - t) / s.size
    return float(loss.mean()), grad


def distance_to_logit(distance, pivot: float, scale: float = 1.0):
    """Affine map ``scale * (pivot - distance)`` onto the logit axis.

    Distances below ``pivot`` (more similar than the reference point,
    typically the median training distance) map to positive logits.
    """
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return scale * (pivot - np.asarray(distance, dtype=np.float64))
