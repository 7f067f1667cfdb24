"""From-scratch supervised learners for binary and multi-class prediction.

Four families: multinomial / gaussian Naive Bayes, k-nearest neighbors,
a linear SVM trained by primal sub-gradient descent, and a gradient
boosting machine over depth-limited regression trees with the Friedman
MSE split criterion.  Everything runs in 64-bit floats and is
deterministic for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import expit, logsumexp, softmax

from .errors import ConfigError, DataError
from .serialize import pack_array as _pack_array, unpack_array as _unpack_array
from .vectorize import DimensionMismatchError, FeatureMatrix

__all__ = [
    "GbmConfig",
    "TrainedModel",
    "RegressionTree",
    "PredictionResult",
    "SingleClassError",
    "NegativeFeatureError",
    "KTooLargeError",
    "UnknownLabelError",
    "train_nb",
    "train_knn",
    "train_svm",
    "train_gbm",
    "predict",
    "save_model",
    "load_model",
    "svm_objective",
    "svm_subgradient",
]


class SingleClassError(DataError):
    """Training labels contain fewer than two classes."""


class NegativeFeatureError(DataError):
    """Multinomial NB requires non-negative features."""


class KTooLargeError(ConfigError):
    """KNN k exceeds the number of training rows."""


class UnknownLabelError(DataError):
    """A label falls outside the expected label space."""


def _as_rows(features: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(features, FeatureMatrix):
        return features.rows
    return np.asarray(features, dtype=np.float64)


def _spec_of(features: Union[FeatureMatrix, np.ndarray]) -> Optional[str]:
    if isinstance(features, FeatureMatrix):
        return str(features.spec)
    return None


def _label_space(labels: Sequence) -> tuple:
    # numpy scalars are converted so the space survives JSON persistence
    plain = [x.item() if isinstance(x, np.generic) else x for x in labels]
    try:
        space = tuple(sorted(set(plain)))
    except TypeError:
        space = tuple(sorted(set(plain), key=str))
    return space


def _encode_labels(labels: Sequence, space: tuple) -> np.ndarray:
    index = {c: i for i, c in enumerate(space)}
    return np.array([index[y] for y in labels], dtype=np.int64)


@dataclass(frozen=True)
class GbmConfig:
    """Gradient boosting hyperparameters (defaults follow the reported run)."""

    learning_rate: float = 0.1
    n_trees: int = 100
    subsample: float = 1.0
    max_depth: int = 3
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.learning_rate <= 1):
            raise ConfigError("learning_rate must be in (0, 1]")
        if not (0 < self.subsample <= 1):
            raise ConfigError("subsample must be in (0, 1]")
        if self.max_depth < 1 or self.n_trees < 1:
            raise ConfigError("max_depth and n_trees must be >= 1")
        if self.min_samples_split < 2 or self.min_samples_leaf < 1:
            raise ConfigError("min_samples_split >= 2 and min_samples_leaf >= 1 required")


@dataclass(frozen=True)
class RegressionTree:
    """Flat-array binary regression tree.

    feature[i] is -1 at leaves; children indices refer into the same
    arrays; value[i] is only meaningful at leaves.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.float64)
        for r in range(X.shape[0]):
            node = 0
            while self.feature[node] >= 0:
                if X[r, self.feature[node]] <= self.threshold[node]:
                    node = self.left[node]
                else:
                    node = self.right[node]
            out[r] = self.value[node]
        return out


@dataclass(frozen=True)
class TrainedModel:
    """A fitted classifier plus the label space and provenance."""

    kind: str
    label_space: tuple
    params: dict = field(repr=False)
    feature_width: int = 0
    feature_spec: Optional[str] = None
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PredictionResult:
    """Predicted labels and per-class scores (columns follow label_space)."""

    labels: np.ndarray
    scores: np.ndarray
    label_space: tuple


def _check_multiclass(space: tuple) -> None:
    if len(space) < 2:
        raise SingleClassError(f"need >= 2 classes, got {list(space)}")


def train_nb(features: Union[FeatureMatrix, np.ndarray], labels: Sequence,
             variant: str = "multinomial", alpha: float = 1.0) -> TrainedModel:
    """Naive Bayes.

    multinomial: Laplace-smoothed per-class feature-count likelihoods over
    non-negative features.  gaussian: per-class feature means and
    variances with a 1e-9 variance floor.  Both store log priors from
    class frequencies.
    """
    X = _as_rows(features)
    space = _label_space(labels)
    _check_multiclass(space)
    y = _encode_labels(labels, space)
    C = len(space)
    priors = np.array([(y == c).sum() for c in range(C)], dtype=np.float64)
    log_prior = np.log(priors / priors.sum())

    if variant == "multinomial":
        if np.any(X < 0):
            raise NegativeFeatureError("multinomial NB needs non-negative features")
        if alpha <= 0:
            raise ConfigError("alpha must be > 0")
        counts = np.stack([X[y == c].sum(axis=0) for c in range(C)])
        smoothed = counts + alpha
        log_like = np.log(smoothed / smoothed.sum(axis=1, keepdims=True))
        params = {"log_prior": log_prior, "log_like": log_like, "alpha": alpha}
    elif variant == "gaussian":
        means = np.stack([X[y == c].mean(axis=0) for c in range(C)])
        variances = np.stack([X[y == c].var(axis=0) for c in range(C)])
        variances = np.maximum(variances, 1e-9)
        params = {"log_prior": log_prior, "means": means, "variances": variances}
    else:
        raise ConfigError(f"unknown NB variant {variant!r}")
    return TrainedModel(
        kind=f"nb_{variant}", label_space=space, params=params,
        feature_width=X.shape[1], feature_spec=_spec_of(features),
    )


def train_knn(features: Union[FeatureMatrix, np.ndarray], labels: Sequence,
              k: int = 5, metric: str = "euclidean") -> TrainedModel:
    """K-nearest neighbors; stores the training matrix verbatim.

    Distance ties are broken by lower training-row index, vote ties by
    lower class index.
    """
    X = _as_rows(features)
    space = _label_space(labels)
    _check_multiclass(space)
    y = _encode_labels(labels, space)
    if k < 1:
        raise ConfigError("k must be >= 1")
    if k > X.shape[0]:
        raise KTooLargeError(f"k={k} exceeds {X.shape[0]} training rows")
    if metric not in ("euclidean", "cosine"):
        raise ConfigError(f"unknown metric {metric!r}")
    params = {"X": X.copy(), "y": y, "k": k, "metric": metric}
    return TrainedModel(
        kind="knn", label_space=space, params=params,
        feature_width=X.shape[1], feature_spec=_spec_of(features),
    )


def svm_objective(w: np.ndarray, b: float, X: np.ndarray, y_pm: np.ndarray,
                  lam: float) -> float:
    """Regularized hinge objective: lam/2 ||w||^2 + mean hinge loss."""
    margins = y_pm * (X @ w + b)
    hinge = np.maximum(0.0, 1.0 - margins)
    return 0.5 * lam * float(w @ w) + float(hinge.mean())


def svm_subgradient(w: np.ndarray, b: float, X: np.ndarray, y_pm: np.ndarray,
                    lam: float) -> tuple[np.ndarray, float]:
    """Batch sub-gradient of svm_objective at (w, b)."""
    margins = y_pm * (X @ w + b)
    active = margins < 1.0
    n = X.shape[0]
    gw = lam * w - (y_pm[active] @ X[active]) / n
    gb = -float(y_pm[active].sum()) / n
    return gw, gb


def _train_svm_binary(X: np.ndarray, y_pm: np.ndarray, lam: float, epochs: int,
                      rng: np.random.Generator) -> tuple[np.ndarray, float]:
    n, d = X.shape
    w = np.zeros(d, dtype=np.float64)
    b = 0.0
    t = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for i in order:
            t += 1
            lr = 1.0 / (lam * t)
            margin = y_pm[i] * (X[i] @ w + b)
            w *= 1.0 - lr * lam
            if margin < 1.0:
                w += lr * y_pm[i] * X[i]
                b += lr * y_pm[i]
    return w, b


def train_svm(features: Union[FeatureMatrix, np.ndarray], labels: Sequence,
              lam: float = 1e-4, epochs: int = 20, seed: int = 0) -> TrainedModel:
    """Linear SVM by primal sub-gradient descent with learning rate 1/(lam*t).

    Multi-class inputs are handled one-vs-rest with one weight vector per
    class; binary inputs store a single separating hyperplane.
    """
    X = _as_rows(features)
    space = _label_space(labels)
    _check_multiclass(space)
    y = _encode_labels(labels, space)
    if lam <= 0 or epochs < 1:
        raise ConfigError("lam must be > 0 and epochs >= 1")
    rng = np.random.default_rng(seed)
    if len(space) == 2:
        y_pm = np.where(y == 1, 1.0, -1.0)
        w, b = _train_svm_binary(X, y_pm, lam, epochs, rng)
        params = {"W": w.reshape(1, -1), "b": np.array([b]), "lam": lam, "binary": True}
    else:
        W = np.zeros((len(space), X.shape[1]), dtype=np.float64)
        bs = np.zeros(len(space), dtype=np.float64)
        for c in range(len(space)):
            y_pm = np.where(y == c, 1.0, -1.0)
            W[c], bs[c] = _train_svm_binary(X, y_pm, lam, epochs, rng)
        params = {"W": W, "b": bs, "lam": lam, "binary": False}
    return TrainedModel(
        kind="linear_svm", label_space=space, params=params,
        feature_width=X.shape[1], feature_spec=_spec_of(features),
        metadata={"seed": seed, "epochs": epochs},
    )


def _best_split(X: np.ndarray, r: np.ndarray, idx: np.ndarray,
                min_leaf: int) -> Optional[tuple[int, float, float]]:
    """Exhaustive Friedman-MSE split search over one node.

    Returns (feature, threshold, improvement) for the best split, or None
    when no position satisfies the leaf-size and distinct-value rules.
    Ties go to the lowest feature index, then the lowest threshold.
    improvement = n_l * n_r / (n_l + n_r) * (mean_l - mean_r)^2.
    """
    n = idx.size
    if n < 2 * min_leaf:
        return None
    Xn = X[idx]
    rn = r[idx]
    order = np.argsort(Xn, axis=0, kind="stable")
    sv = np.take_along_axis(Xn, order, axis=0)
    sr = rn[order]
    prefix = np.cumsum(sr, axis=0)
    total = prefix[-1]

    ii = np.arange(min_leaf, n - min_leaf + 1)  # left sizes
    if ii.size == 0:
        return None
    left_sum = prefix[ii - 1]
    n_r = n - ii
    mean_l = left_sum / ii[:, None]
    mean_r = (total[None, :] - left_sum) / n_r[:, None]
    diff = mean_l - mean_r
    imp = (ii * n_r / n)[:, None] * diff * diff
    valid = sv[ii] > sv[ii - 1]
    imp = np.where(valid, imp, -np.inf)

    best_pos = np.argmax(imp, axis=0)
    best_per_feature = imp[best_pos, np.arange(imp.shape[1])]
    f = int(np.argmax(best_per_feature))
    if not np.isfinite(best_per_feature[f]) or best_per_feature[f] <= 0.0:
        return None
    pos = int(best_pos[f])
    i = int(ii[pos])
    threshold = 0.5 * (float(sv[i - 1, f]) + float(sv[i, f]))
    return f, threshold, float(best_per_feature[f])


def _build_tree(X: np.ndarray, residual: np.ndarray, leaf_value, idx: np.ndarray,
                cfg: GbmConfig) -> RegressionTree:
    """Greedy depth-first tree on the given rows; leaf_value(rows) -> float."""
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def grow(rows: np.ndarray, depth: int) -> int:
        node = new_node()
        split = None
        if depth < cfg.max_depth and rows.size >= cfg.min_samples_split:
            split = _best_split(X, residual, rows, cfg.min_samples_leaf)
        if split is None:
            value[node] = float(leaf_value(rows))
            return node
        f, thr, _ = split
        feature[node] = f
        threshold[node] = thr
        go_left = X[rows, f] <= thr
        left[node] = grow(rows[go_left], depth + 1)
        right[node] = grow(rows[~go_left], depth + 1)
        return node

    grow(idx, 0)
    return RegressionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
    )


def _binary_log_loss(y: np.ndarray, score: np.ndarray) -> float:
    # mean logistic loss of raw scores against 0/1 targets, computed stably
    return float(np.mean(np.logaddexp(0.0, score) - y * score))


def _softmax_log_loss(y: np.ndarray, scores: np.ndarray) -> float:
    lse = logsumexp(scores, axis=1)
    picked = scores[np.arange(scores.shape[0]), y]
    return float(np.mean(lse - picked))


def train_gbm(features: Union[FeatureMatrix, np.ndarray], labels: Sequence,
              config: GbmConfig = GbmConfig()) -> TrainedModel:
    """Gradient boosting with logistic (binary) or softmax (multi-class) loss.

    Binary: initial score is the log-odds of the positive rate; each stage
    fits one tree to the residuals y - p and sets leaf values by a Newton
    step sum(r) / sum(p(1-p)).  Multi-class: one tree per class per stage
    on softmax residuals with the standard (K-1)/K Newton leaf step.
    Stage scores are added scaled by the learning rate.  The per-stage
    training loss is recorded under params["stage_losses"].
    """
    X = _as_rows(features)
    space = _label_space(labels)
    _check_multiclass(space)
    y = _encode_labels(labels, space)
    n = X.shape[0]
    rng = np.random.default_rng(config.seed)
    sample_size = max(1, int(round(config.subsample * n)))

    stage_losses: list[float] = []
    if len(space) == 2:
        y01 = y.astype(np.float64)
        p1 = y01.mean()
        init = float(np.log(p1 / (1.0 - p1)))
        score = np.full(n, init, dtype=np.float64)
        trees: list[RegressionTree] = []
        for _ in range(config.n_trees):
            rows = (np.sort(rng.choice(n, size=sample_size, replace=False))
                    if config.subsample < 1.0 else np.arange(n))
            p = expit(score)
            residual = y01 - p

            def leaf_value(members: np.ndarray) -> float:
                num = residual[members].sum()
                den = (p[members] * (1.0 - p[members])).sum()
                return num / den if den > 0 else 0.0

            tree = _build_tree(X, residual, leaf_value, rows, config)
            trees.append(tree)
            score += config.learning_rate * tree.predict(X)
            stage_losses.append(_binary_log_loss(y01, score))
        params = {"init": np.array([init]), "trees": [trees],
                  "stage_losses": np.array(stage_losses)}
    else:
        C = len(space)
        priors = np.array([(y == c).mean() for c in range(C)])
        init = np.log(priors)
        scores = np.tile(init, (n, 1))
        onehot = np.zeros((n, C), dtype=np.float64)
        onehot[np.arange(n), y] = 1.0
        per_class_trees: list[list[RegressionTree]] = [[] for _ in range(C)]
        for _ in range(config.n_trees):
            rows = (np.sort(rng.choice(n, size=sample_size, replace=False))
                    if config.subsample < 1.0 else np.arange(n))
            probs = softmax(scores, axis=1)
            for c in range(C):
                residual = onehot[:, c] - probs[:, c]

                def leaf_value(members: np.ndarray, _r=residual) -> float:
                    num = _r[members].sum()
                    den = (np.abs(_r[members]) * (1.0 - np.abs(_r[members]))).sum()
                    return (C - 1) / C * num / den if den > 0 else 0.0

                tree = _build_tree(X, residual, leaf_value, rows, config)
                per_class_trees[c].append(tree)
                scores[:, c] += config.learning_rate * tree.predict(X)
            stage_losses.append(_softmax_log_loss(y, scores))
        params = {"init": init, "trees": per_class_trees,
                  "stage_losses": np.array(stage_losses)}
    params["config"] = config
    return TrainedModel(
        kind="gbm", label_space=space, params=params,
        feature_width=X.shape[1], feature_spec=_spec_of(features),
        metadata={"seed": config.seed},
    )


def _gbm_raw_scores(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    cfg: GbmConfig = model.params["config"]
    trees = model.params["trees"]
    init = model.params["init"]
    if len(model.label_space) == 2:
        score = np.full(X.shape[0], float(init[0]), dtype=np.float64)
        for tree in trees[0]:
            score += cfg.learning_rate * tree.predict(X)
        return score
    scores = np.tile(init, (X.shape[0], 1))
    for c, class_trees in enumerate(trees):
        for tree in class_trees:
            scores[:, c] += cfg.learning_rate * tree.predict(X)
    return scores


def predict(model: TrainedModel, features: Union[FeatureMatrix, np.ndarray]) -> PredictionResult:
    """Labels and per-class scores for each row.

    Scores are probabilities for NB and GBM, signed margins for the SVM,
    and vote fractions for KNN; columns follow model.label_space.  The
    predicted label is the argmax (KNN applies its own tie rules).
    """
    X = _as_rows(features)
    if X.shape[1] != model.feature_width:
        raise DimensionMismatchError(
            f"model expects width {model.feature_width}, got {X.shape[1]}"
        )
    space = model.label_space
    C = len(space)
    n = X.shape[0]

    if model.kind == "nb_multinomial":
        if np.any(X < 0):
            raise NegativeFeatureError("multinomial NB needs non-negative features")
        joint = model.params["log_prior"] + X @ model.params["log_like"].T
        scores = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
        winners = np.argmax(scores, axis=1)
    elif model.kind == "nb_gaussian":
        means = model.params["means"]
        variances = model.params["variances"]
        joint = np.empty((n, C), dtype=np.float64)
        for c in range(C):
            ll = -0.5 * (np.log(2.0 * np.pi * variances[c])
                         + (X - means[c]) ** 2 / variances[c]).sum(axis=1)
            joint[:, c] = model.params["log_prior"][c] + ll
        scores = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
        winners = np.argmax(scores, axis=1)
    elif model.kind == "knn":
        Xt = model.params["X"]
        yt = model.params["y"]
        k = model.params["k"]
        if model.params["metric"] == "euclidean":
            d2 = ((X[:, None, :] - Xt[None, :, :]) ** 2).sum(axis=2)
            dist = np.sqrt(np.maximum(d2, 0.0))
        else:
            qn = np.linalg.norm(X, axis=1, keepdims=True)
            tn = np.linalg.norm(Xt, axis=1, keepdims=True)
            qs = np.where(qn > 0, X / np.where(qn > 0, qn, 1.0), 0.0)
            ts = np.where(tn > 0, Xt / np.where(tn > 0, tn, 1.0), 0.0)
            dist = 1.0 - qs @ ts.T
        scores = np.zeros((n, C), dtype=np.float64)
        winners = np.empty(n, dtype=np.int64)
        row_idx = np.arange(Xt.shape[0])
        for r in range(n):
            order = np.lexsort((row_idx, dist[r]))[:k]
            votes = np.bincount(yt[order], minlength=C)
            scores[r] = votes / k
            winners[r] = int(np.argmax(votes))
        return PredictionResult(
            labels=np.array([space[w] for w in winners]), scores=scores, label_space=space,
        )
    elif model.kind == "linear_svm":
        margins = X @ model.params["W"].T + model.params["b"]
        if model.params["binary"]:
            m = margins[:, 0]
            scores = np.stack([-m, m], axis=1)
        else:
            scores = margins
        winners = np.argmax(scores, axis=1)
    elif model.kind == "gbm":
        raw = _gbm_raw_scores(model, X)
        if C == 2:
            p1 = expit(raw)
            scores = np.stack([1.0 - p1, p1], axis=1)
        else:
            scores = softmax(raw, axis=1)
        winners = np.argmax(scores, axis=1)
    else:
        raise ConfigError(f"unknown model kind {model.kind!r}")

    return PredictionResult(
        labels=np.array([space[w] for w in winners]), scores=scores, label_space=space,
    )


# ---------------------------------------------------------------------------
# persistence: versioned JSON envelope with base64 little-endian arrays

_FORMAT = "harlex-model"
_VERSION = 1


def _tree_state(tree: RegressionTree) -> dict:
    return {
        "feature": _pack_array(tree.feature),
        "threshold": _pack_array(tree.threshold),
        "left": _pack_array(tree.left),
        "right": _pack_array(tree.right),
        "value": _pack_array(tree.value),
    }


def _tree_from_state(d: dict) -> RegressionTree:
    return RegressionTree(
        feature=_unpack_array(d["feature"]),
        threshold=_unpack_array(d["threshold"]),
        left=_unpack_array(d["left"]),
        right=_unpack_array(d["right"]),
        value=_unpack_array(d["value"]),
    )


def _params_state(model: TrainedModel) -> dict:
    p = model.params
    if model.kind in ("nb_multinomial",):
        return {"log_prior": _pack_array(p["log_prior"]),
                "log_like": _pack_array(p["log_like"]), "alpha": p["alpha"]}
    if model.kind == "nb_gaussian":
        return {"log_prior": _pack_array(p["log_prior"]),
                "means": _pack_array(p["means"]),
                "variances": _pack_array(p["variances"])}
    if model.kind == "knn":
        return {"X": _pack_array(p["X"]), "y": _pack_array(p["y"]),
                "k": p["k"], "metric": p["metric"]}
    if model.kind == "linear_svm":
        return {"W": _pack_array(p["W"]), "b": _pack_array(p["b"]),
                "lam": p["lam"], "binary": p["binary"]}
    if model.kind == "gbm":
        cfg: GbmConfig = p["config"]
        return {
            "init": _pack_array(p["init"]),
            "stage_losses": _pack_array(p["stage_losses"]),
            "trees": [[_tree_state(t) for t in group] for group in p["trees"]],
            "config": {
                "learning_rate": cfg.learning_rate, "n_trees": cfg.n_trees,
                "subsample": cfg.subsample, "max_depth": cfg.max_depth,
                "min_samples_split": cfg.min_samples_split,
                "min_samples_leaf": cfg.min_samples_leaf, "seed": cfg.seed,
            },
        }
    raise ConfigError(f"cannot serialize model kind {model.kind!r}")


def _params_from_state(kind: str, d: dict) -> dict:
    if kind == "nb_multinomial":
        return {"log_prior": _unpack_array(d["log_prior"]),
                "log_like": _unpack_array(d["log_like"]), "alpha": d["alpha"]}
    if kind == "nb_gaussian":
        return {"log_prior": _unpack_array(d["log_prior"]),
                "means": _unpack_array(d["means"]),
                "variances": _unpack_array(d["variances"])}
    if kind == "knn":
        return {"X": _unpack_array(d["X"]), "y": _unpack_array(d["y"]),
                "k": d["k"], "metric": d["metric"]}
    if kind == "linear_svm":
        return {"W": _unpack_array(d["W"]), "b": _unpack_array(d["b"]),
                "lam": d["lam"], "binary": d["binary"]}
    if kind == "gbm":
        return {
            "init": _unpack_array(d["init"]),
            "stage_losses": _unpack_array(d["stage_losses"]),
            "trees": [[_tree_from_state(t) for t in group] for group in d["trees"]],
            "config": GbmConfig(**d["config"]),
        }
    raise DataError(f"unknown model kind {kind!r} in file")


def save_model(model: TrainedModel, path: Union[str, Path],
               builder_state: Optional[dict] = None) -> None:
    """Write a model (and optionally its fitted feature builder) to JSON.

    Arrays travel as base64 little-endian payloads, so a reload
    reproduces predictions bit for bit.
    """
    envelope = {
        "format": _FORMAT,
        "version": _VERSION,
        "kind": model.kind,
        "label_space": list(model.label_space),
        "feature_width": model.feature_width,
        "feature_spec": model.feature_spec,
        "metadata": model.metadata,
        "params": _params_state(model),
    }
    if builder_state is not None:
        envelope["builder"] = builder_state
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(envelope, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path: Union[str, Path]) -> tuple[TrainedModel, Optional[dict]]:
    """Load a model envelope; returns (model, builder_state or None)."""
    with open(path, encoding="utf-8") as fh:
        envelope = json.load(fh)
    if envelope.get("format") != _FORMAT or envelope.get("version") != _VERSION:
        raise DataError(f"{path}: not a model file (or unsupported version)")
    model = TrainedModel(
        kind=envelope["kind"],
        label_space=tuple(envelope["label_space"]),
        params=_params_from_state(envelope["kind"], envelope["params"]),
        feature_width=envelope["feature_width"],
        feature_spec=envelope.get("feature_spec"),
        metadata=envelope.get("metadata", {}),
    )
    return model, envelope.get("builder")
