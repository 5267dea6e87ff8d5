"""Random forest over 41-dim window features, built from scratch.

CART trees with bagging: bootstrap resamples, per-node random feature
subsets (sqrt of the feature count), best split by weighted Gini impurity
decrease, grown to purity. Class imbalance is countered with balanced
sample weights. Everything is deterministic given the config seed: tree t
draws from its own generator seeded by (seed, t), split-gain ties break
toward the lowest feature index and then the lowest threshold.
"""

from __future__ import annotations

import json
import math
import struct
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dsp import FEATURE_LAYOUT_V1, FeatureVector
from .errors import ConfigError, InferenceError, ModelFormatError, TrainingError
from .dataset import WindowSample, canonical_order

CLASS_WEIGHT_MODES = ("balanced", "balanced_per_tree")


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 200
    max_features: str | int = "sqrt"
    min_samples_leaf: int = 1
    max_depth: int | None = None
    bootstrap: bool = True
    # "balanced_per_tree" recomputes weights on each bootstrap sample;
    # "balanced" computes them once on the full training set
    class_weight: str = "balanced_per_tree"
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.class_weight not in CLASS_WEIGHT_MODES:
            raise ConfigError(f"class_weight must be one of {CLASS_WEIGHT_MODES}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def n_candidate_features(self, n_features: int) -> int:
        if self.max_features == "sqrt":
            return max(1, int(math.sqrt(n_features)))
        k = int(self.max_features)
        if not 1 <= k <= n_features:
            raise ConfigError(f"max_features {k} out of range for {n_features} features")
        return k

    def to_json_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_features": self.max_features,
            "min_samples_leaf": self.min_samples_leaf,
            "max_depth": self.max_depth,
            "bootstrap": self.bootstrap,
            "class_weight": self.class_weight,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ForestConfig":
        return cls(**obj)


@dataclass
class DecisionTree:
    """Flat-array CART tree: feature < 0 marks a leaf, score is the
    weighted positive fraction at that leaf."""

    feature: np.ndarray  # int16, -1 for leaves
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32, -1 for leaves
    right: np.ndarray  # int32
    score: np.ndarray  # float64

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


@dataclass
class ForestModel:
    config: ForestConfig
    trees: list[DecisionTree]
    n_features: int
    layout_version: str = FEATURE_LAYOUT_V1


def balanced_class_weights(labels: np.ndarray) -> tuple[float, float]:
    """(w_negative, w_positive) with w_c = n / (2 * count_c).

    After weighting, both classes carry equal total mass.
    """
    labels = np.asarray(labels, dtype=bool)
    n = len(labels)
    n_pos = int(labels.sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise TrainingError("balanced weights need both classes present")
    return n / (2.0 * n_neg), n / (2.0 * n_pos)


def _gini_partition_score(w_pos_left, w_neg_left, w_pos, w_neg):
    """Sum over children of W_child * (1 - Gini); higher is purer."""
    w_left = w_pos_left + w_neg_left
    w_pos_right = w_pos - w_pos_left
    w_neg_right = w_neg - w_neg_left
    w_right = w_pos_right + w_neg_right
    left = np.where(w_left > 0, (w_pos_left**2 + w_neg_left**2) / np.maximum(w_left, 1e-300), 0.0)
    right = np.where(
        w_right > 0,
        (w_pos_right**2 + w_neg_right**2) / np.maximum(w_right, 1e-300),
        0.0,
    )
    return left + right


def _best_split(X, y, w, candidates):
    """Best (feature, threshold, gain) over candidate features at one node.

    ``gain`` is the decrease of total weighted Gini impurity; returns
    gain <= 0 when no candidate separates the node. Candidates are scanned
    in ascending feature order and thresholds ascending, and a new winner
    must be strictly better, which fixes tie-breaking.
    """
    w_pos = float(w[y].sum())
    w_neg = float(w[~y].sum())
    parent = (w_pos**2 + w_neg**2) / (w_pos + w_neg)
    best = (-1, 0.0, 0.0)
    for f in sorted(int(c) for c in candidates):
        values = X[:, f]
        order = np.argsort(values, kind="stable")
        v = values[order]
        distinct = np.flatnonzero(v[:-1] < v[1:])
        if len(distinct) == 0:
            continue
        wp = np.cumsum((w * y)[order])[distinct]
        wa = np.cumsum(w[order])[distinct]
        score = _gini_partition_score(wp, wa - wp, w_pos, w_neg)
        i = int(np.argmax(score))
        gain = float(score[i]) - parent
        if gain > best[2]:
            thr = 0.5 * (v[distinct[i]] + v[distinct[i] + 1])
            best = (f, float(thr), gain)
    return best


def _grow_tree(X, y, w, config: ForestConfig, rng) -> DecisionTree:
    n_features = X.shape[1]
    k = config.n_candidate_features(n_features)
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    score: list[float] = []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        score.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        y_node = y[idx]
        w_node = w[idx]
        total = w_node.sum()
        pos = w_node[y_node].sum()
        score[node] = float(pos / total) if total > 0 else 0.0
        pure = pos == 0.0 or pos == total
        depth_capped = config.max_depth is not None and depth >= config.max_depth
        if pure or depth_capped or len(idx) < 2 * config.min_samples_leaf:
            continue
        candidates = rng.choice(n_features, size=k, replace=False)
        f, thr, gain = _best_split(X[idx], y_node, w_node, candidates)
        if f < 0 or gain <= 0.0:
            continue
        go_left = X[idx, f] <= thr
        if not go_left.any() or go_left.all():
            continue
        if min(go_left.sum(), (~go_left).sum()) < config.min_samples_leaf:
            continue
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], idx[~go_left], depth + 1))
        stack.append((left[node], idx[go_left], depth + 1))
    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int16),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        score=np.asarray(score, dtype=np.float64),
    )


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    config: ForestConfig,
    per_tree_seconds: list[float] | None = None,
) -> ForestModel:
    """Train on a feature matrix; rows must already be in canonical order."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=bool)
    if len(X) != len(y):
        raise TrainingError("feature/label length mismatch")
    if len(X) < 2:
        raise TrainingError("need at least 2 samples")
    if y.all() or not y.any():
        raise TrainingError("training data contains a single class")

    full_weights = None
    if config.class_weight == "balanced":
        w_neg, w_pos = balanced_class_weights(y)
        full_weights = np.where(y, w_pos, w_neg)

    n = len(y)
    trees = []
    for t in range(config.n_trees):
        started = time.perf_counter()
        rng = np.random.default_rng([config.seed, t])
        idx = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        y_boot = y[idx]
        if full_weights is not None:
            w_boot = full_weights[idx]
        elif y_boot.any() and not y_boot.all():
            w_neg, w_pos = balanced_class_weights(y_boot)
            w_boot = np.where(y_boot, w_pos, w_neg)
        else:
            w_boot = np.ones(len(idx))
        trees.append(_grow_tree(X[idx], y_boot, w_boot, config, rng))
        if per_tree_seconds is not None:
            per_tree_seconds.append(time.perf_counter() - started)
    return ForestModel(config=config, trees=trees, n_features=X.shape[1])


def train_forest(
    samples: Sequence[WindowSample],
    config: ForestConfig = ForestConfig(),
    per_tree_seconds: list[float] | None = None,
) -> ForestModel:
    """Train from window samples (canonicalized by participant/recording/index)."""
    ordered = canonical_order(samples)
    missing = [s.sample_id for s in ordered if s.feature_vector is None]
    if missing:
        raise TrainingError(f"samples missing feature vectors, e.g. {missing[0]}")
    layouts = {s.feature_vector.layout_version for s in ordered}
    if len(layouts) > 1:
        raise TrainingError(f"mixed feature layouts {sorted(layouts)}")
    X = np.stack([s.feature_vector.values for s in ordered])
    y = np.array([s.label for s in ordered], dtype=bool)
    model = fit_forest(X, y, config, per_tree_seconds=per_tree_seconds)
    model.layout_version = layouts.pop() if layouts else FEATURE_LAYOUT_V1
    return model


def _tree_scores(tree: DecisionTree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(len(X), dtype=np.int32)
    while True:
        rows = np.flatnonzero(tree.feature[node] >= 0)
        if len(rows) == 0:
            break
        current = node[rows]
        go_left = X[rows, tree.feature[current]] <= tree.threshold[current]
        node[rows] = np.where(go_left, tree.left[current], tree.right[current])
    return tree.score[node]


def predict_scores(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Mean leaf score across trees for each row of X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise InferenceError(
            f"expected feature matrix with {model.n_features} columns, got {X.shape}"
        )
    total = np.zeros(len(X))
    for tree in model.trees:
        total += _tree_scores(tree, X)
    return total / len(model.trees)


def predict_forest(model: ForestModel, feature_vector: FeatureVector) -> tuple[float, bool]:
    """(score in [0,1], label at threshold 0.5) for one window."""
    if feature_vector.layout_version != model.layout_version:
        raise InferenceError(
            f"feature layout {feature_vector.layout_version!r} does not match "
            f"model layout {model.layout_version!r}"
        )
    score = float(predict_scores(model, feature_vector.values[None, :])[0])
    return score, score >= 0.5


# ---------------------------------------------------------------------------
# binary serialization ("FRST" payload)
# ---------------------------------------------------------------------------


def forest_to_bytes(model: ForestModel) -> bytes:
    header = json.dumps(
        {
            "config": model.config.to_json_dict(),
            "n_features": model.n_features,
            "layout_version": model.layout_version,
        },
        sort_keys=True,
    ).encode()
    blob = [struct.pack("<I", len(header)), header, struct.pack("<I", len(model.trees))]
    for tree in model.trees:
        blob.append(struct.pack("<I", tree.n_nodes))
        blob.append(tree.feature.astype("<i2").tobytes())
        blob.append(tree.threshold.astype("<f8").tobytes())
        blob.append(tree.left.astype("<i4").tobytes())
        blob.append(tree.right.astype("<i4").tobytes())
        blob.append(tree.score.astype("<f8").tobytes())
    return b"".join(blob)


def forest_from_bytes(payload: bytes) -> ForestModel:
    try:
        view = memoryview(payload)
        (header_len,) = struct.unpack_from("<I", view, 0)
        header = json.loads(bytes(view[4 : 4 + header_len]))
        offset = 4 + header_len
        (n_trees,) = struct.unpack_from("<I", view, offset)
        offset += 4
        trees = []
        for _ in range(n_trees):
            (n_nodes,) = struct.unpack_from("<I", view, offset)
            offset += 4
            arrays = []
            for dtype, width in (("<i2", 2), ("<f8", 8), ("<i4", 4), ("<i4", 4), ("<f8", 8)):
                arrays.append(
                    np.frombuffer(view, dtype=dtype, count=n_nodes, offset=offset).copy()
                )
                offset += n_nodes * width
            feature, threshold, left, right, score = arrays
            trees.append(
                DecisionTree(
                    feature=feature.astype(np.int16),
                    threshold=threshold.astype(np.float64),
                    left=left.astype(np.int32),
                    right=right.astype(np.int32),
                    score=score.astype(np.float64),
                )
            )
        if offset != len(payload):
            raise ModelFormatError("trailing bytes after forest payload")
    except (struct.error, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt forest payload: {exc}") from None
    return ForestModel(
        config=ForestConfig.from_json_dict(header["config"]),
        trees=trees,
        n_features=header["n_features"],
        layout_version=header["layout_version"],
    )
