"""CART decision trees and the tree ensembles used for pair classification.

Everything is built from scratch on the 4-feature vectors: a Gini CART
learner, bagged forests with per-split feature subsampling, discrete
two-class AdaBoost over depth-limited trees, and logistic-loss gradient
boosting with Newton leaf steps. Split search runs through the kernel
backend. Models are deterministic functions of (data order, params, seed)
and serialize to versioned JSON that round-trips to identical predictions.
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .blocking import FEATURE_NAMES, CandidatePair, FeatureVector
from .errors import ConfigError, LoadError

N_FEATURES = len(FEATURE_NAMES)

MODEL_FORMAT = "placelink-model"
MODEL_FORMAT_VERSION = 1


class Provenance(str, Enum):
    INITIAL_MANUAL = "INITIAL_MANUAL"
    BOOTSTRAP_CONFIRMED = "BOOTSTRAP_CONFIRMED"
    BOOTSTRAP_RECTIFIED = "BOOTSTRAP_RECTIFIED"


class LabelSource(str, Enum):
    HUMAN_INITIAL = "HUMAN_INITIAL"
    HUMAN_RECTIFY = "HUMAN_RECTIFY"
    MODEL_CONFIRMED = "MODEL_CONFIRMED"


class ModelKind(str, Enum):
    TREE = "TREE"
    FOREST = "FOREST"
    ADABOOST = "ADABOOST"
    GBM = "GBM"


@dataclass(frozen=True)
class LabeledPair:
    pair: CandidatePair
    label: int
    provenance: Provenance
    source: LabelSource = LabelSource.HUMAN_INITIAL

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ConfigError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


def split_train_test(data: list, spec: SplitSpec) -> tuple[list, list]:
    """Seeded shuffle split; sizes deviate from the fraction by at most 1."""
    n = len(data)
    if n < 5:
        raise ConfigError(f"need at least 5 rows to split, got {n}")
    perm = np.random.default_rng(spec.seed).permutation(n)
    n_train = int(round(n * spec.train_fraction))
    n_train = min(max(n_train, 1), n - 1)
    train = [data[i] for i in perm[:n_train]]
    test = [data[i] for i in perm[n_train:]]
    return train, test


def pairs_to_xy(data: list[LabeledPair]) -> tuple[np.ndarray, np.ndarray]:
    x = np.empty((len(data), N_FEATURES), dtype=np.float64)
    y = np.empty(len(data), dtype=np.float64)
    for i, lp in enumerate(data):
        if lp.pair.features is None:
            raise ConfigError(f"labeled pair {lp.pair.pair_id} has no features")
        x[i] = lp.pair.features.as_array()
        y[i] = lp.label
    return x, y


@dataclass
class _Tree:
    """Flat node arrays; feature == -1 marks a leaf, value is its score."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict_values(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape[0], dtype=np.float64)
        for i in range(x.shape[0]):
            node = 0
            while self.feature[node] >= 0:
                if x[i, self.feature[node]] <= self.threshold[node]:
                    node = self.left[node]
                else:
                    node = self.right[node]
            out[i] = self.value[node]
        return out

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "_Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int32),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int32),
            right=np.asarray(d["right"], dtype=np.int32),
            value=np.asarray(d["value"], dtype=np.float64),
        )


class _TreeGrower:
    """Shared recursive construction for classification and regression trees.

    criterion 'gini' uses weighted two-class Gini with leaf = positive
    fraction; 'sse' uses squared-error on gradients with Newton leaves
    sum(g) / (sum(h) + l2). Split gains accumulate into `importances`.
    """

    def __init__(self, x, y, w, hess, criterion, max_depth, min_leaf,
                 max_features, rng, importances, l2=0.0):
        self.x = x
        self.y = y
        self.w = w
        self.hess = hess
        self.criterion = criterion
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.rng = rng
        self.importances = importances
        self.l2 = l2
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self._all_features = np.arange(N_FEATURES, dtype=np.int64)

    def build(self) -> _Tree:
        self._grow(np.arange(self.x.shape[0], dtype=np.int64), 0)
        return _Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
        )

    def _leaf_value(self, idx) -> float:
        if self.criterion == "gini":
            wsum = float(np.sum(self.w[idx]))
            return float(np.sum(self.w[idx] * self.y[idx])) / wsum
        gsum = float(np.sum(self.y[idx]))
        hsum = float(np.sum(self.hess[idx])) + self.l2
        return gsum / max(hsum, 1e-12)

    def _is_pure(self, idx) -> bool:
        if self.criterion == "gini":
            ysub = self.y[idx]
            return bool(np.all(ysub == ysub[0]))
        return False

    def _emit_leaf(self, idx) -> int:
        node = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(self._leaf_value(idx))
        return node

    def _grow(self, idx, depth) -> int:
        if (
            (self.max_depth is not None and depth >= self.max_depth)
            or idx.size < 2 * self.min_leaf
            or idx.size < 2
            or self._is_pure(idx)
        ):
            return self._emit_leaf(idx)
        if self.max_features is not None and self.max_features < N_FEATURES:
            feats = np.sort(
                self.rng.choice(N_FEATURES, size=self.max_features, replace=False)
            ).astype(np.int64)
        else:
            feats = self._all_features
        xsub = np.ascontiguousarray(self.x[idx])
        if self.criterion == "gini":
            f, thr, gain = kernels.best_split_gini(
                xsub, self.y[idx], self.w[idx], feats, self.min_leaf
            )
        else:
            f, thr, gain = kernels.best_split_sse(xsub, self.y[idx], feats, self.min_leaf)
        if f < 0:
            return self._emit_leaf(idx)
        node = len(self.feature)
        self.feature.append(int(f))
        self.threshold.append(float(thr))
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.importances[f] += gain
        mask = self.x[idx, f] <= thr
        self.left[node] = self._grow(idx[mask], depth + 1)
        self.right[node] = self._grow(idx[~mask], depth + 1)
        return node


@dataclass
class TreeModel:
    """A trained classifier: a single CART tree or one of the ensembles."""

    kind: ModelKind
    params: dict
    seed: int
    trees: list[_Tree]
    tree_weights: list[float]
    base_score: float
    feature_importances: np.ndarray
    train_log: dict = field(default_factory=dict)

    def predict_scores(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        n = x.shape[0]
        if self.kind == ModelKind.GBM:
            # base_score is the initial log-odds here, not a probability
            raw = np.full(n, self.base_score)
            for t, lr in zip(self.trees, self.tree_weights):
                raw += lr * t.predict_values(x)
            return 1.0 / (1.0 + np.exp(-raw))
        if not self.trees:
            return np.full(n, self.base_score)
        if self.kind == ModelKind.TREE:
            return self.trees[0].predict_values(x)
        if self.kind == ModelKind.FOREST:
            votes = np.zeros(n)
            for t in self.trees:
                votes += (t.predict_values(x) >= 0.5).astype(np.float64)
            return votes / len(self.trees)
        # ADABOOST: alpha-weighted fraction of rounds voting matched
        total = sum(self.tree_weights)
        acc = np.zeros(n)
        for t, alpha in zip(self.trees, self.tree_weights):
            acc += alpha * (t.predict_values(x) >= 0.5).astype(np.float64)
        return acc / total

    def predict_labels(self, x: np.ndarray) -> np.ndarray:
        return (self.predict_scores(x) >= 0.5).astype(np.int64)

    def save(self, path) -> None:
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_FORMAT_VERSION,
            "kind": self.kind.value,
            "params": self.params,
            "seed": self.seed,
            "base_score": self.base_score,
            "tree_weights": self.tree_weights,
            "feature_names": list(FEATURE_NAMES),
            "feature_importances": self.feature_importances.tolist(),
            "trees": [t.to_dict() for t in self.trees],
            "train_log": self.train_log,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "TreeModel":
        path = Path(path)
        if not path.exists():
            raise LoadError(path, 0, "file does not exist")
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("format") != MODEL_FORMAT:
            raise LoadError(path, 1, f"not a {MODEL_FORMAT} file")
        if doc.get("version") != MODEL_FORMAT_VERSION:
            raise LoadError(path, 1, f"unsupported model version {doc.get('version')}")
        return cls(
            kind=ModelKind(doc["kind"]),
            params=doc["params"],
            seed=doc["seed"],
            trees=[_Tree.from_dict(d) for d in doc["trees"]],
            tree_weights=[float(v) for v in doc["tree_weights"]],
            base_score=float(doc["base_score"]),
            feature_importances=np.asarray(doc["feature_importances"], dtype=np.float64),
            train_log=doc.get("train_log", {}),
        )


def predict(model: TreeModel, features) -> tuple[int, float]:
    """Classify one feature vector; label is 1 iff score >= 0.5."""
    if isinstance(features, FeatureVector):
        features = features.as_array()
    score = float(model.predict_scores(np.asarray(features, dtype=np.float64).reshape(1, -1))[0])
    return (1 if score >= 0.5 else 0), score


def feature_importances(model: TreeModel) -> np.ndarray:
    return model.feature_importances.copy()


def _normalize_importances(raw: np.ndarray) -> np.ndarray:
    total = float(raw.sum())
    if total <= 0.0:
        return np.full(N_FEATURES, 1.0 / N_FEATURES)
    return raw / total


def _as_xy(train) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(train, tuple):
        x, y = train
        return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    return pairs_to_xy(train)


def _apply_class_weight(y: np.ndarray, class_weight: float) -> np.ndarray:
    # class_weight multiplies the matched-class weight; 1.0 = unweighted
    w = np.ones_like(y)
    if class_weight != 1.0:
        w = np.where(y == 1.0, class_weight, 1.0)
    return w


def _constant_model(kind: ModelKind, params: dict, seed: int, y: np.ndarray) -> TreeModel:
    p = float(np.mean(y))
    if kind == ModelKind.GBM:
        clipped = min(max(p, 1e-12), 1.0 - 1e-12)
        base = math.log(clipped / (1.0 - clipped))
    else:
        base = p
    return TreeModel(
        kind=kind,
        params=params,
        seed=seed,
        trees=[],
        tree_weights=[],
        base_score=base,
        feature_importances=np.full(N_FEATURES, 1.0 / N_FEATURES),
    )


def train_decision_tree(
    train,
    max_depth: Optional[int] = None,
    min_leaf: int = 1,
    class_weight: float = 1.0,
    sample_weight: Optional[np.ndarray] = None,
    seed: int = 0,
) -> TreeModel:
    """Single CART tree with Gini impurity and exhaustive threshold search."""
    x, y = _as_xy(train)
    if x.shape[0] == 0:
        raise ConfigError("training data is empty")
    params = {"max_depth": max_depth, "min_leaf": min_leaf, "class_weight": class_weight}
    if y.min() == y.max():
        return _constant_model(ModelKind.TREE, params, seed, y)
    w = _apply_class_weight(y, class_weight)
    if sample_weight is not None:
        w = w * sample_weight
    raw_imp = np.zeros(N_FEATURES)
    grower = _TreeGrower(
        x, y, w, None, "gini", max_depth, min_leaf, None, None, raw_imp
    )
    tree = grower.build()
    return TreeModel(
        kind=ModelKind.TREE,
        params=params,
        seed=seed,
        trees=[tree],
        tree_weights=[1.0],
        base_score=float(np.mean(y)),
        feature_importances=_normalize_importances(raw_imp),
    )


def train_random_forest(
    train,
    n_trees: int = 100,
    max_features: int = 2,
    max_depth: Optional[int] = None,
    min_leaf: int = 1,
    bootstrap: bool = True,
    class_weight: float = 1.0,
    seed: int = 0,
) -> TreeModel:
    """Bagged Gini trees with per-split feature subsampling, majority vote."""
    x, y = _as_xy(train)
    if x.shape[0] == 0:
        raise ConfigError("training data is empty")
    params = {
        "n_trees": n_trees,
        "max_features": max_features,
        "max_depth": max_depth,
        "min_leaf": min_leaf,
        "bootstrap": bootstrap,
        "class_weight": class_weight,
    }
    if y.min() == y.max():
        return _constant_model(ModelKind.FOREST, params, seed, y)
    n = x.shape[0]
    raw_imp = np.zeros(N_FEATURES)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        if bootstrap:
            idx = rng.integers(0, n, size=n)
        else:
            idx = np.arange(n)
        w = _apply_class_weight(y[idx], class_weight)
        grower = _TreeGrower(
            x[idx], y[idx], w, None, "gini", max_depth, min_leaf, max_features, rng, raw_imp
        )
        trees.append(grower.build())
    return TreeModel(
        kind=ModelKind.FOREST,
        params=params,
        seed=seed,
        trees=trees,
        tree_weights=[1.0] * len(trees),
        base_score=float(np.mean(y)),
        feature_importances=_normalize_importances(raw_imp),
    )


def train_adaboost(
    train,
    n_rounds: int = 100,
    base_depth: int = 1,
    min_leaf: int = 1,
    class_weight: float = 1.0,
    seed: int = 0,
) -> TreeModel:
    """Discrete two-class AdaBoost over depth-limited Gini trees.

    Round weight alpha = 0.5 * ln((1 - eps) / eps). A round with weighted
    error >= 0.5 is discarded and stops boosting; a perfect round gets the
    capped alpha ln(1e9) and also stops.
    """
    x, y = _as_xy(train)
    if x.shape[0] == 0:
        raise ConfigError("training data is empty")
    params = {
        "n_rounds": n_rounds,
        "base_depth": base_depth,
        "min_leaf": min_leaf,
        "class_weight": class_weight,
    }
    if y.min() == y.max():
        return _constant_model(ModelKind.ADABOOST, params, seed, y)
    w = _apply_class_weight(y, class_weight)
    w = w / w.sum()
    trees = []
    alphas = []
    round_errors = []
    raw_imp = np.zeros(N_FEATURES)
    for _ in range(n_rounds):
        raw_imp_round = np.zeros(N_FEATURES)
        grower = _TreeGrower(
            x, y, w, None, "gini", base_depth, min_leaf, None, None, raw_imp_round
        )
        tree = grower.build()
        votes = (tree.predict_values(x) >= 0.5).astype(np.float64)
        eps = float(np.sum(w * (votes != y)))
        if eps >= 0.5:
            break
        if eps <= 0.0:
            trees.append(tree)
            alphas.append(math.log(1e9))
            round_errors.append(eps)
            raw_imp += alphas[-1] * raw_imp_round
            break
        alpha = 0.5 * math.log((1.0 - eps) / eps)
        trees.append(tree)
        alphas.append(alpha)
        round_errors.append(eps)
        raw_imp += alpha * raw_imp_round
        w = w * np.exp(alpha * np.where(votes != y, 1.0, -1.0))
        w = w / w.sum()
    if not trees:
        return _constant_model(ModelKind.ADABOOST, params, seed, y)
    return TreeModel(
        kind=ModelKind.ADABOOST,
        params=params,
        seed=seed,
        trees=trees,
        tree_weights=alphas,
        base_score=float(np.mean(y)),
        feature_importances=_normalize_importances(raw_imp),
        train_log={"round_errors": round_errors},
    )


def train_gradient_boost(
    train,
    n_trees: int = 100,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    min_leaf: int = 1,
    l2_leaf: float = 0.0,
    seed: int = 0,
) -> TreeModel:
    """Stagewise regression trees on the logistic-loss gradient.

    The initial raw score is the log-odds of the training base rate; each
    stage fits a squared-error tree to the residual y - sigmoid(F) and sets
    leaf values by a Newton step sum(g) / (sum(h) + l2_leaf).
    """
    x, y = _as_xy(train)
    if x.shape[0] == 0:
        raise ConfigError("training data is empty")
    params = {
        "n_trees": n_trees,
        "learning_rate": learning_rate,
        "max_depth": max_depth,
        "min_leaf": min_leaf,
        "l2_leaf": l2_leaf,
    }
    if y.min() == y.max():
        return _constant_model(ModelKind.GBM, params, seed, y)
    p0 = float(np.mean(y))
    base = math.log(p0 / (1.0 - p0))
    raw = np.full(x.shape[0], base)
    raw_imp = np.zeros(N_FEATURES)
    trees = []
    losses = []
    for _ in range(n_trees):
        p = 1.0 / (1.0 + np.exp(-raw))
        losses.append(_log_loss(y, p))
        grad = y - p
        hess = p * (1.0 - p)
        grower = _TreeGrower(
            x, grad, None, hess, "sse", max_depth, min_leaf, None, None, raw_imp,
            l2=l2_leaf,
        )
        tree = grower.build()
        trees.append(tree)
        raw = raw + learning_rate * tree.predict_values(x)
    p = 1.0 / (1.0 + np.exp(-raw))
    losses.append(_log_loss(y, p))
    return TreeModel(
        kind=ModelKind.GBM,
        params=params,
        seed=seed,
        trees=trees,
        tree_weights=[learning_rate] * len(trees),
        base_score=base,
        feature_importances=_normalize_importances(raw_imp),
        train_log={"stage_log_loss": losses},
    )


def _log_loss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-15, 1.0 - 1e-15)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


TRAINERS = {
    ModelKind.TREE: train_decision_tree,
    ModelKind.FOREST: train_random_forest,
    ModelKind.ADABOOST: train_adaboost,
    ModelKind.GBM: train_gradient_boost,
}


def train_model(kind: ModelKind, train, seed: int = 0, **params) -> TreeModel:
    return TRAINERS[kind](train, seed=seed, **params)
