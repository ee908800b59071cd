"""Condensation diagnostics on a layer's neuron input weights."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .linalg import as_matrix


@dataclass
class MetricsRecord:
    epoch: int
    train_loss: float
    val_metric: float = float("nan")
    neuron_similarity: float = 0.0
    weight_correlation: float = 0.0
    step_time_ms: float = float("nan")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def cosine_matrix(w) -> np.ndarray:
    """Row-wise cosine similarity ``C[i, j] = cos(w_i, w_j)``.

    Zero rows have zero similarity with everything, themselves included.
    Values are clipped to ``[-1, 1]``.
    """
    w = as_matrix(w, "w")
    norms = np.sqrt(np.einsum("ij,ij->i", w, w))
    inv = np.zeros_like(norms)
    nz = norms > 0
    inv[nz] = 1.0 / norms[nz]
    u = w * inv[:, None]
    c = u @ u.T
    np.clip(c, -1.0, 1.0, out=c)
    return c


def weight_correlation(c) -> float:
    """Sum of absolute off-diagonal cosine similarities.

    The diagonal is left out: it is the constant ``N`` for nonzero rows.
    """
    c = np.asarray(c, dtype=np.float64)
    return float(np.abs(c[~np.eye(c.shape[0], dtype=bool)]).sum())


def neuron_similarity(c) -> float:
    """Largest absolute off-diagonal cosine similarity (0 for fewer than 2 rows)."""
    c = np.asarray(c, dtype=np.float64)
    n = c.shape[0]
    if n < 2:
        return 0.0
    a = np.abs(c)
    off = a[~np.eye(n, dtype=bool)]
    return float(off.max())
