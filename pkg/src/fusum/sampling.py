"""Class-imbalance handling for the extraction classifier.

Three strategies, all returning (X, y, sample_weight):

- "weight": keep the data, give every positive instance weight n_neg/n_pos.
- "resample": redraw a same-size dataset with replacement so the class
  counts come out equal (within one instance).
- "smote": keep the data and append synthetic minority points interpolated
  between real minority neighbors until the classes balance.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .features import BINARY_FEATURES

SAMPLING_STRATEGIES = ("none", "weight", "resample", "smote")


def _check_labels(y: np.ndarray, strategy: str) -> None:
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0, 1))):
        raise ValidationError("labels must be 0 or 1")
    if strategy != "none" and len(classes) < 2:
        raise ValidationError(
            f"sampling strategy {strategy!r} needs both classes present")


def smote_oversample(X_minority: np.ndarray, n_new: int, k_neighbors: int,
                     rng: np.random.Generator,
                     binary_features: tuple[int, ...] = ()) -> np.ndarray:
    """Synthesize n_new minority points.

    Each point is x + u * (nn - x) for a random minority base x, u uniform in
    [0, 1], and nn one of x's k nearest minority neighbors by Euclidean
    distance over the numeric columns. Binary columns are copied from x.
    """
    m = len(X_minority)
    if m < 2:
        raise ValidationError("SMOTE needs at least two minority instances")
    if k_neighbors < 1:
        raise ValidationError("k_neighbors must be >= 1")
    if n_new <= 0:
        return np.empty((0, X_minority.shape[1]))

    numeric = [j for j in range(X_minority.shape[1]) if j not in binary_features]
    Xn = X_minority[:, numeric]
    d2 = ((Xn[:, None, :] - Xn[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    k = min(k_neighbors, m - 1)
    neighbor_idx = np.argsort(d2, axis=1, kind="stable")[:, :k]

    out = np.empty((n_new, X_minority.shape[1]))
    for i in range(n_new):
        base = int(rng.integers(m))
        nn = int(neighbor_idx[base, int(rng.integers(k))])
        u = rng.random()
        row = X_minority[base].copy()
        row[numeric] = X_minority[base, numeric] + u * (
            X_minority[nn, numeric] - X_minority[base, numeric])
        out[i] = row
    return out


def rebalance(X: np.ndarray, y: np.ndarray, strategy: str = "none", *,
              k_neighbors: int = 5, seed: int = 0,
              binary_features: tuple[int, ...] = BINARY_FEATURES,
              ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Apply one sampling strategy; returns (X, y, sample_weight)."""
    if strategy not in SAMPLING_STRATEGIES:
        raise ValidationError(f"unknown sampling strategy {strategy!r}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) != len(y):
        raise ValidationError("X must be 2d with one row per label")
    _check_labels(y, strategy)

    if strategy == "none":
        return X, y, np.ones(len(y))

    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)

    if strategy == "weight":
        w = np.ones(len(y))
        w[pos] = len(neg) / len(pos)
        return X, y, w

    rng = np.random.default_rng(seed)

    if strategy == "resample":
        n = len(y)
        n_pos = n // 2
        n_neg = n - n_pos
        idx = np.concatenate([
            neg[rng.integers(len(neg), size=n_neg)],
            pos[rng.integers(len(pos), size=n_pos)],
        ])
        return X[idx], y[idx], np.ones(n)

    # smote: grow the minority class up to the majority size
    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    n_new = len(majority) - len(minority)
    synth = smote_oversample(X[minority], n_new, k_neighbors, rng,
                             binary_features)
    X_out = np.vstack([X, synth])
    y_out = np.concatenate([y, np.full(len(synth), y[minority[0]])])
    return X_out, y_out, np.ones(len(y_out))
