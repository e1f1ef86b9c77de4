"""Binary classifiers for utterance extraction, implemented from scratch.

Both estimators follow the usual fit/predict/predict_proba surface and honor
per-instance weights, which is how the "weight" sampling strategy reaches the
learners. Model state serializes to plain JSON so trained models can move
between the CLI subcommands.
"""

from __future__ import annotations

import json
import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, clone

from .errors import ValidationError
from .metrics import classifier_prf
from .sampling import rebalance


def _check_fit_args(X, y, sample_weight):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2:
        raise ValidationError("X must be a 2d array")
    if len(X) != len(y):
        raise ValidationError("X and y disagree on the number of instances")
    if not np.all(np.isin(np.unique(y), (0, 1))):
        raise ValidationError("labels must be 0 or 1")
    if len(np.unique(y)) < 2:
        raise ValidationError("training data must contain both classes")
    if sample_weight is None:
        w = np.ones(len(y))
    else:
        w = np.asarray(sample_weight, dtype=float)
        if len(w) != len(y) or np.any(w < 0) or w.sum() <= 0:
            raise ValidationError("sample_weight must be non-negative with positive sum")
    return X, y, w


class NaiveBayes(ClassifierMixin, BaseEstimator):
    """Gaussian/Bernoulli naive Bayes with weighted sufficient statistics.

    Columns whose training values are all 0/1 are treated as Bernoulli (with
    add-one style smoothing); the rest get per-class Gaussians with a variance
    floor so constant features stay finite.
    """

    def __init__(self, var_floor: float = 1e-9, bern_smoothing: float = 1.0):
        self.var_floor = var_floor
        self.bern_smoothing = bern_smoothing

    def fit(self, X, y, sample_weight=None):
        X, y, w = _check_fit_args(X, y, sample_weight)
        d = X.shape[1]
        self.n_features_in_ = d
        self.classes_ = np.array([0, 1])
        self.binary_mask_ = np.array(
            [np.all(np.isin(X[:, j], (0.0, 1.0))) for j in range(d)])
        total = w.sum()
        self.priors_ = np.empty(2)
        self.means_ = np.zeros((2, d))
        self.variances_ = np.ones((2, d))
        self.rates_ = np.full((2, d), 0.5)
        s = self.bern_smoothing
        for cls in (0, 1):
            mask = y == cls
            wc = w[mask]
            xc = X[mask]
            wsum = wc.sum()
            self.priors_[cls] = wsum / total
            mean = (wc[:, None] * xc).sum(axis=0) / wsum
            var = (wc[:, None] * (xc - mean) ** 2).sum(axis=0) / wsum
            self.means_[cls] = mean
            self.variances_[cls] = np.maximum(var, self.var_floor)
            self.rates_[cls] = ((wc[:, None] * xc).sum(axis=0) + s) / (wsum + 2 * s)
        return self

    def _joint_log_likelihood(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}")
        jll = np.tile(np.log(self.priors_), (len(X), 1))
        gauss = ~self.binary_mask_
        for cls in (0, 1):
            if gauss.any():
                mu = self.means_[cls, gauss]
                var = self.variances_[cls, gauss]
                diff = X[:, gauss] - mu
                jll[:, cls] += (-0.5 * (np.log(2 * np.pi * var) + diff ** 2 / var)
                                ).sum(axis=1)
            if self.binary_mask_.any():
                r = self.rates_[cls, self.binary_mask_]
                xb = X[:, self.binary_mask_]
                jll[:, cls] += (xb * np.log(r) + (1 - xb) * np.log(1 - r)).sum(axis=1)
        return jll

    def predict_proba(self, X):
        jll = self._joint_log_likelihood(X)
        jll -= jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    def to_json(self) -> dict:
        return {
            "kind": "nb",
            "var_floor": self.var_floor,
            "bern_smoothing": self.bern_smoothing,
            "n_features": self.n_features_in_,
            "binary_mask": self.binary_mask_.astype(int).tolist(),
            "priors": self.priors_.tolist(),
            "means": self.means_.tolist(),
            "variances": self.variances_.tolist(),
            "rates": self.rates_.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "NaiveBayes":
        model = cls(var_floor=obj["var_floor"], bern_smoothing=obj["bern_smoothing"])
        model.n_features_in_ = obj["n_features"]
        model.classes_ = np.array([0, 1])
        model.binary_mask_ = np.array(obj["binary_mask"], dtype=bool)
        model.priors_ = np.array(obj["priors"])
        model.means_ = np.array(obj["means"])
        model.variances_ = np.array(obj["variances"])
        model.rates_ = np.array(obj["rates"])
        return model


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return 1.0 - float((p * p).sum())


def _best_split(column: np.ndarray, y: np.ndarray,
                parent_gini: float) -> tuple[float, float] | None:
    """Highest-gain threshold for one feature via a sorted prefix scan."""
    order = np.argsort(column, kind="stable")
    xs = column[order]
    ys = y[order]
    n = len(ys)
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    prefix = np.cumsum(ys)
    left_n = np.arange(1, n, dtype=float)
    left_pos = prefix[:-1].astype(float)
    right_n = n - left_n
    right_pos = prefix[-1] - left_pos
    gini_l = 1.0 - (left_pos ** 2 + (left_n - left_pos) ** 2) / left_n ** 2
    gini_r = 1.0 - (right_pos ** 2 + (right_n - right_pos) ** 2) / right_n ** 2
    gain = parent_gini - (left_n * gini_l + right_n * gini_r) / n
    gain[~valid] = -np.inf
    k = int(np.argmax(gain))
    return float(gain[k]), float((xs[k] + xs[k + 1]) / 2.0)


def _build_tree(X: np.ndarray, y: np.ndarray, n_split_features: int,
                rng: np.random.Generator) -> dict:
    """Grow one unpruned CART node; leaves store raw class counts."""
    counts = np.bincount(y, minlength=2).astype(float)
    if counts[0] == 0 or counts[1] == 0 or len(X) < 2:
        return {"counts": counts.tolist()}

    d = X.shape[1]
    feature_pool = rng.choice(d, size=min(n_split_features, d), replace=False)
    parent_gini = _gini(counts)
    best = None  # (gain, feature, threshold)
    for j in sorted(feature_pool):
        found = _best_split(X[:, j], y, parent_gini)
        if found is None:
            continue
        gain, t = found
        if best is None or gain > best[0] + 1e-12:
            best = (gain, j, t)
    if best is None or best[0] <= 1e-12:
        return {"counts": counts.tolist()}

    _, j, t = best
    left = X[:, j] <= t
    return {
        "feature": int(j),
        "threshold": t,
        "left": _build_tree(X[left], y[left], n_split_features, rng),
        "right": _build_tree(X[~left], y[~left], n_split_features, rng),
    }


def _tree_vote(node: dict, x: np.ndarray) -> int:
    while "feature" in node:
        node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
    counts = node["counts"]
    # deterministic tie handling: equal counts vote negative
    return int(counts[1] > counts[0])


class RandomForest(ClassifierMixin, BaseEstimator):
    """Bagged CART ensemble grown to purity.

    Each tree trains on a weighted bootstrap (instances drawn with probability
    proportional to sample_weight) and considers ceil(sqrt(d)) random features
    per split. The positive score is the fraction of trees voting positive.
    """

    def __init__(self, n_trees: int = 100, seed: int = 0):
        self.n_trees = n_trees
        self.seed = seed

    def fit(self, X, y, sample_weight=None):
        if self.n_trees < 1:
            raise ValidationError("n_trees must be >= 1")
        X, y, w = _check_fit_args(X, y, sample_weight)
        n, d = X.shape
        self.n_features_in_ = d
        self.classes_ = np.array([0, 1])
        n_split_features = math.ceil(math.sqrt(d))
        p = w / w.sum()
        seeds = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        self.trees_ = []
        for ss in seeds:
            rng = np.random.default_rng(ss)
            idx = rng.choice(n, size=n, replace=True, p=p)
            self.trees_.append(_build_tree(X[idx], y[idx], n_split_features, rng))
        return self

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}")
        votes = np.array([[_tree_vote(t, x) for t in self.trees_] for x in X])
        pos = votes.mean(axis=1)
        return np.column_stack([1 - pos, pos])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    def to_json(self) -> dict:
        return {
            "kind": "rf",
            "n_trees": self.n_trees,
            "seed": self.seed,
            "n_features": self.n_features_in_,
            "trees": self.trees_,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RandomForest":
        model = cls(n_trees=obj["n_trees"], seed=obj["seed"])
        model.n_features_in_ = obj["n_features"]
        model.classes_ = np.array([0, 1])
        model.trees_ = obj["trees"]
        return model


def classify(model, features) -> tuple[int, float]:
    """Label one feature vector; the score is the positive-class probability."""
    x = features.to_array() if hasattr(features, "to_array") else np.asarray(features)
    score = float(model.predict_proba(x[None, :])[0, 1])
    return int(score >= 0.5), score


def save_model(model, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh, sort_keys=True)
        fh.write("\n")


def load_model(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    kind = obj.get("kind")
    if kind == "nb":
        return NaiveBayes.from_json(obj)
    if kind == "rf":
        return RandomForest.from_json(obj)
    raise ValidationError(f"unknown model kind {kind!r}")


def make_classifier(name: str, *, n_trees: int = 100, seed: int = 0):
    if name == "nb":
        return NaiveBayes()
    if name == "rf":
        return RandomForest(n_trees=n_trees, seed=seed)
    raise ValidationError(f"unknown classifier {name!r}")


def _stratified_folds(y: np.ndarray, folds: int,
                      rng: np.random.Generator) -> list[np.ndarray]:
    """Deal each class round-robin into folds after a seeded shuffle."""
    buckets: list[list[int]] = [[] for _ in range(folds)]
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        for i, j in enumerate(idx):
            buckets[i % folds].append(int(j))
    return [np.array(sorted(b)) for b in buckets]


def cross_validate(X, y, estimator, *, folds: int = 10, sampling: str = "none",
                   k_neighbors: int = 5, seed: int = 0) -> dict:
    """Stratified k-fold CV with sampling applied inside training folds only.

    Predictions from all test folds are pooled before scoring, and the
    reported precision/recall/F are support-weighted over both classes.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if folds < 2:
        raise ValidationError("folds must be >= 2")
    if len(y) < folds:
        raise ValidationError("need at least as many instances as folds")
    rng = np.random.default_rng(seed)
    buckets = _stratified_folds(y, folds, rng)
    y_true: list[int] = []
    y_pred: list[int] = []
    for f, test_idx in enumerate(buckets):
        if len(test_idx) == 0:
            continue
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[test_idx] = False
        Xtr, ytr, wtr = rebalance(X[train_mask], y[train_mask], sampling,
                                  k_neighbors=k_neighbors, seed=seed + f)
        model = clone(estimator)
        model.fit(Xtr, ytr, sample_weight=wtr)
        preds = model.predict(X[test_idx])
        y_true.extend(int(v) for v in y[test_idx])
        y_pred.extend(int(v) for v in preds)
    return classifier_prf(y_true, y_pred)
