"""Predictors and evaluation protocol: baselines, linear models, and
hand-rolled CART random forests.

The forest implementation keeps per-node cover statistics (the training
weight reaching each node) because exact additive attribution needs them, and
guarantees bit-identical results for a fixed (data, config, seed) triple
regardless of thread count: every tree draws its bootstrap sample and feature
subsets from its own generator, derived by seed-splitting, so build order
cannot matter.

Split semantics: `x <= threshold` goes left; thresholds are midpoints between
consecutive distinct sorted values; the best split minimizes the
size-weighted child impurity (Gini for classification, variance for
regression), with ties resolved toward the lowest feature index and lowest
threshold. Classification leaves store the class-1 fraction so the forest's
averaged output is a probability.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

TASK_CLASSIFICATION = "classification"
TASK_REGRESSION = "regression"
TASKS = (TASK_CLASSIFICATION, TASK_REGRESSION)

REPEATED_10_FOLD = "repeated_10_fold"
STRATIFIED_10_FOLD = "stratified_10_fold"

FOREST_DOC_VERSION = "glancelab-forest/1"


class ModelError(Exception):
    pass


class EmptyData(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class TooFewRows(ModelError):
    pass


class UnstratifiableData(ModelError):
    pass


class SingularDesign(Warning):
    """Design matrix is rank-deficient; the fit fell back to ridge."""


# ---------------------------------------------------------------------------
# Trees
# ---------------------------------------------------------------------------

@dataclass
class TreeNode:
    """Binary CART node. feature_index == -1 marks a leaf.

    `value` is the node's training mean (class-1 fraction for
    classification); `cover` is the bootstrap-sample count that reached the
    node, so cover(parent) == cover(left) + cover(right) everywhere.
    """

    value: float
    cover: float
    feature_index: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature_index < 0


@dataclass(frozen=True)
class ForestConfig:
    n_estimators: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    bootstrap: bool = True
    max_features: str = "auto"  # auto | sqrt | all
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None")
        if self.max_features not in ("auto", "sqrt", "all"):
            raise ValueError(f"unknown max_features {self.max_features!r}")

    def resolve_max_features(self, task: str, n_features: int) -> int:
        mode = self.max_features
        if mode == "auto":
            mode = "sqrt" if task == TASK_CLASSIFICATION else "all"
        if mode == "sqrt":
            return max(1, int(math.sqrt(n_features)))
        return n_features


# Tuned configurations for the two tasks (found by random search on the
# fleet-scale study data; kept as named defaults).
CLASSIFICATION_PRESET = ForestConfig(
    n_estimators=200, max_depth=10, min_samples_split=5, min_samples_leaf=2,
    bootstrap=True, max_features="auto")
REGRESSION_PRESET = ForestConfig(
    n_estimators=1600, max_depth=60, min_samples_split=2, min_samples_leaf=4,
    bootstrap=True, max_features="auto")

DEFAULT_SEARCH_SPACE: dict[str, tuple] = {
    "n_estimators": tuple(range(100, 2001, 100)),
    "max_depth": tuple(range(10, 101, 10)),
    "min_samples_split": (2, 5, 10),
    "min_samples_leaf": (1, 2, 4),
    "bootstrap": (True, False),
    "max_features": ("auto", "sqrt"),
}


def _node_value(y: np.ndarray) -> float:
    # class-1 fraction and regression mean coincide on 0/1 targets
    return float(np.mean(y))


def _impurity(y: np.ndarray, task: str) -> float:
    if task == TASK_CLASSIFICATION:
        p = float(np.mean(y))
        return 1.0 - p * p - (1.0 - p) * (1.0 - p)
    return float(np.var(y))


def _best_split(X: np.ndarray, y: np.ndarray, rows: np.ndarray,
                feats: np.ndarray, task: str, min_leaf: int):
    """Exhaustive scan over midpoint candidates of the given features.

    Returns (weighted_child_impurity, feature, threshold) or None. Features
    are visited in ascending order and improvements must be strict, so ties
    land on the lowest feature index / lowest threshold.
    """
    n = rows.size
    yv = y[rows]
    best = None
    for f in feats:
        xs = X[rows, f]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        ys = yv[order]
        boundary = np.nonzero(xs[1:] > xs[:-1])[0]
        if boundary.size == 0:
            continue
        nL = boundary + 1
        nR = n - nL
        ok = (nL >= min_leaf) & (nR >= min_leaf)
        boundary, nL, nR = boundary[ok], nL[ok], nR[ok]
        if boundary.size == 0:
            continue
        s = np.cumsum(ys)
        sL = s[boundary]
        sR = s[-1] - sL
        if task == TASK_CLASSIFICATION:
            pL = sL / nL
            pR = sR / nR
            impL = 1.0 - pL * pL - (1.0 - pL) * (1.0 - pL)
            impR = 1.0 - pR * pR - (1.0 - pR) * (1.0 - pR)
        else:
            q = np.cumsum(ys * ys)
            qL = q[boundary]
            qR = q[-1] - qL
            impL = np.maximum(qL / nL - (sL / nL) ** 2, 0.0)
            impR = np.maximum(qR / nR - (sR / nR) ** 2, 0.0)
        weighted = (nL * impL + nR * impR) / n
        k = int(np.argmin(weighted))
        if best is None or weighted[k] < best[0]:
            thr = float((xs[boundary[k]] + xs[boundary[k] + 1]) / 2.0)
            best = (float(weighted[k]), int(f), thr)
    return best


def _grow(X: np.ndarray, y: np.ndarray, rows: np.ndarray, depth: int,
          task: str, config: ForestConfig, k_feats: int,
          rng: np.random.Generator) -> TreeNode:
    node = TreeNode(value=_node_value(y[rows]), cover=float(rows.size))
    max_depth = config.max_depth if config.max_depth is not None else 1 << 30
    yv = y[rows]
    if (depth >= max_depth
            or rows.size < config.min_samples_split
            or np.all(yv == yv[0])):
        return node
    n_features = X.shape[1]
    if k_feats >= n_features:
        feats = np.arange(n_features)
    else:
        feats = np.sort(rng.choice(n_features, size=k_feats, replace=False))
    best = _best_split(X, y, rows, feats, task, config.min_samples_leaf)
    if best is None:
        return node
    _, f, thr = best
    mask = X[rows, f] <= thr
    node.feature_index = f
    node.threshold = thr
    node.left = _grow(X, y, rows[mask], depth + 1, task, config, k_feats, rng)
    node.right = _grow(X, y, rows[~mask], depth + 1, task, config, k_feats, rng)
    return node


def fit_tree(X: np.ndarray, y: np.ndarray, task: str, config: ForestConfig,
             rng: np.random.Generator) -> TreeNode:
    """Grow one CART tree on the given rows (no bootstrap here)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.size == 0 or y.size == 0:
        raise EmptyData("cannot fit a tree on zero rows")
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    k = config.resolve_max_features(task, X.shape[1])
    return _grow(X, y, np.arange(X.shape[0]), 0, task, config, k, rng)


@dataclass(frozen=True)
class FlatTree:
    """Array form of one tree (preorder): fast traversal + serialization."""

    children_left: np.ndarray
    children_right: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    max_depth: int


def flatten_tree(root: TreeNode) -> FlatTree:
    cl: list[int] = []
    cr: list[int] = []
    feat: list[int] = []
    thr: list[float] = []
    val: list[float] = []
    cov: list[float] = []
    depths: list[int] = []

    def visit(node: TreeNode, depth: int) -> int:
        i = len(feat)
        cl.append(-1)
        cr.append(-1)
        feat.append(node.feature_index)
        thr.append(node.threshold)
        val.append(node.value)
        cov.append(node.cover)
        depths.append(depth)
        if not node.is_leaf:
            cl[i] = visit(node.left, depth + 1)
            cr[i] = visit(node.right, depth + 1)
        return i

    visit(root, 0)
    return FlatTree(
        children_left=np.asarray(cl, dtype=np.int64),
        children_right=np.asarray(cr, dtype=np.int64),
        feature=np.asarray(feat, dtype=np.int64),
        threshold=np.asarray(thr, dtype=np.float64),
        value=np.asarray(val, dtype=np.float64),
        cover=np.asarray(cov, dtype=np.float64),
        max_depth=max(depths),
    )


@dataclass
class Forest:
    trees: tuple[TreeNode, ...]
    task: str
    config: ForestConfig
    feature_names: tuple[str, ...]
    _flats: tuple[FlatTree, ...] | None = field(
        default=None, repr=False, compare=False)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def flats(self) -> tuple[FlatTree, ...]:
        if self._flats is None:
            self._flats = tuple(flatten_tree(t) for t in self.trees)
        return self._flats


def fit_forest(X: np.ndarray, y: np.ndarray, task: str, config: ForestConfig,
               feature_names: Sequence[str] | None = None,
               n_jobs: int = 1) -> Forest:
    """Fit a forest of bootstrap CART trees, deterministically.

    Each tree gets an independent generator spawned from config.seed, so
    n_jobs only changes wall time, never the result.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyData("need a non-empty 2-D feature matrix")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch(
            f"X has {X.shape[0]} rows, y has {y.shape[0]}")
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(X.shape[1]))
    feature_names = tuple(feature_names)
    if len(feature_names) != X.shape[1]:
        raise DimensionMismatch(
            f"{len(feature_names)} names for {X.shape[1]} columns")

    n = X.shape[0]
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_estimators)

    def build(i: int) -> TreeNode:
        rng = np.random.default_rng(seeds[i])
        rows = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        k = config.resolve_max_features(task, X.shape[1])
        return _grow(X, y, rows, 0, task, config, k, rng)

    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = tuple(pool.map(build, range(config.n_estimators)))
    else:
        trees = tuple(build(i) for i in range(config.n_estimators))
    return Forest(trees=trees, task=task, config=config,
                  feature_names=feature_names)


def _tree_predict_batch(flat: FlatTree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int64)
    row = np.arange(X.shape[0])
    for _ in range(flat.max_depth + 1):
        f = flat.feature[node]
        internal = f >= 0
        if not internal.any():
            break
        xf = X[row, np.where(internal, f, 0)]
        nxt = np.where(xf <= flat.threshold[node],
                       flat.children_left[node], flat.children_right[node])
        node = np.where(internal, nxt, node)
    return flat.value[node]


def predict_batch(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Mean over trees; probabilities for classification forests."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise DimensionMismatch(
            f"expected (n, {forest.n_features}) matrix, got {X.shape}")
    total = np.zeros(X.shape[0], dtype=np.float64)
    for flat in forest.flats():
        total += _tree_predict_batch(flat, X)
    return total / len(forest.trees)


def predict(forest: Forest, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return float(predict_batch(forest, x)[0])


# ---------------------------------------------------------------------------
# Linear and logistic models (internally standardized)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray       # original-unit coefficients
    intercept: float

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights + self.intercept


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    intercept: float

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        z = np.asarray(X, dtype=np.float64) @ self.weights + self.intercept
        return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return self.predict_proba(X)


def _standardize(X: np.ndarray):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd == 0, 1.0, sd)
    return (X - mu) / sd, mu, sd


def fit_linear(X: np.ndarray, y: np.ndarray) -> LinearModel:
    """Ordinary least squares on standardized columns.

    A rank-deficient design is reported via the SingularDesign warning and
    the solve falls back to a tiny ridge penalty.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.size == 0:
        raise EmptyData("no rows")
    Xs, mu, sd = _standardize(X)
    A = np.column_stack([np.ones(len(Xs)), Xs])
    gram = A.T @ A
    if np.linalg.matrix_rank(gram) < gram.shape[0]:
        warnings.warn(SingularDesign(
            "rank-deficient design; solving with ridge eps=1e-6"))
        gram = gram + 1e-6 * np.eye(gram.shape[0])
    beta = np.linalg.solve(gram, A.T @ y)
    w_std = beta[1:]
    w = w_std / sd
    b = float(beta[0] - np.sum(w_std * mu / sd))
    return LinearModel(weights=w, intercept=b)


def fit_logistic(X: np.ndarray, y: np.ndarray, tol: float = 1e-6,
                 max_iter: int = 500) -> LogisticModel:
    """Binary logistic regression by damped Newton iterations.

    Runs on standardized columns until the gradient norm drops below `tol`.
    A vanishing-curvature (separable or rank-deficient) Hessian is reported
    via SingularDesign and stabilized with ridge eps=1e-6.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.size == 0:
        raise EmptyData("no rows")
    Xs, mu, sd = _standardize(X)
    A = np.column_stack([np.ones(len(Xs)), Xs])
    beta = np.zeros(A.shape[1])
    warned = False
    for _ in range(max_iter):
        z = np.clip(A @ beta, -500, 500)
        p = 1.0 / (1.0 + np.exp(-z))
        grad = A.T @ (y - p)
        if float(np.linalg.norm(grad)) < tol:
            break
        w = np.maximum(p * (1.0 - p), 1e-12)
        H = (A * w[:, None]).T @ A
        if np.linalg.matrix_rank(H) < H.shape[0]:
            if not warned:
                warnings.warn(SingularDesign(
                    "ill-conditioned Hessian; ridge eps=1e-6 applied"))
                warned = True
            H = H + 1e-6 * np.eye(H.shape[0])
        step = np.linalg.solve(H, grad)
        # halve the step until the log-likelihood does not decrease
        ll = np.sum(y * z - np.logaddexp(0, z))
        scale = 1.0
        for _ in range(30):
            cand = beta + scale * step
            zc = np.clip(A @ cand, -500, 500)
            if np.sum(y * zc - np.logaddexp(0, zc)) >= ll:
                break
            scale *= 0.5
        beta = beta + scale * step
    w_std = beta[1:]
    w = w_std / sd
    b = float(beta[0] - np.sum(w_std * mu / sd))
    return LogisticModel(weights=w, intercept=b)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

class RandomClassBaseline:
    """Uniform coin per query, seeded."""

    def __init__(self, seed: int = 0):
        self._rng = np.random.default_rng(seed)

    def predict_batch(self, X) -> np.ndarray:
        return self._rng.integers(0, 2, size=len(X)).astype(np.float64)


@dataclass(frozen=True)
class MedianBaseline:
    """Constant predictor: the training median."""

    median: float

    def predict_batch(self, X) -> np.ndarray:
        return np.full(len(X), self.median, dtype=np.float64)


def baseline_predict(task: str, y_train: np.ndarray | Sequence[float] = (),
                     seed: int = 0):
    """The study's reference predictors: a seeded coin flip for
    classification, the training-median constant for regression."""
    if task == TASK_CLASSIFICATION:
        return RandomClassBaseline(seed)
    if task == TASK_REGRESSION:
        y = np.asarray(y_train, dtype=np.float64)
        if y.size == 0:
            raise EmptyData("median baseline needs training targets")
        return MedianBaseline(median=float(np.median(y)))
    raise ValueError(f"unknown task {task!r}")


# ---------------------------------------------------------------------------
# Cross-validation and random search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsReport:
    metric: str                  # accuracy | mae_ms
    fold_values: tuple[float, ...]
    mean: float
    std: float
    n_folds: int
    n_repeats: int

    def as_dict(self) -> dict:
        return {
            "metric": self.metric,
            "fold_values": list(self.fold_values),
            "mean": self.mean,
            "std": self.std,
            "n_folds": self.n_folds,
            "n_repeats": self.n_repeats,
        }


def _metrics_report(metric: str, values: list[float], n_folds: int,
                    n_repeats: int) -> MetricsReport:
    arr = np.asarray(values)
    return MetricsReport(
        metric=metric,
        fold_values=tuple(float(v) for v in values),
        mean=float(arr.mean()),
        std=float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
        n_folds=n_folds,
        n_repeats=n_repeats,
    )


def _plain_folds(n: int, n_folds: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, n_folds)]


def _stratified_folds(y: np.ndarray, n_folds: int, rng: np.random.Generator):
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for cls in (0.0, 1.0):
        members = np.nonzero(y == cls)[0]
        if members.size < n_folds:
            raise UnstratifiableData(
                f"class {int(cls)} has {members.size} rows, "
                f"fewer than {n_folds} folds")
        order = rng.permutation(members)
        for j, idx in enumerate(order):
            folds[j % n_folds].append(int(idx))
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


def _seed_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1)[0])


FitFunction = Callable[[np.ndarray, np.ndarray, int], object]


def cross_validate(X: np.ndarray, y: np.ndarray, fit: FitFunction, task: str,
                   scheme: str, seed: int = 0, n_folds: int = 10,
                   n_repeats: int | None = None) -> MetricsReport:
    """K-fold evaluation: accuracy for classification, MAE for regression.

    `fit(X_train, y_train, fold_seed)` must return an object with
    `predict_batch(X_test)`. The repeated scheme reshuffles each repetition
    with a distinct derived seed (3 repetitions by default); the stratified
    scheme deals each class round-robin so per-fold class counts differ from
    the global ratio by at most one row, and runs once.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if scheme not in (REPEATED_10_FOLD, STRATIFIED_10_FOLD):
        raise ValueError(f"unknown scheme {scheme!r}")
    if n_repeats is None:
        n_repeats = 3 if scheme == REPEATED_10_FOLD else 1
    if len(y) < max(n_folds, 10):
        raise TooFewRows(f"{len(y)} rows is too few for {n_folds}-fold CV")

    root = np.random.SeedSequence(seed)
    repeats = root.spawn(n_repeats)
    values: list[float] = []
    for rep_ss in repeats:
        parts = rep_ss.spawn(n_folds + 1)
        rng = np.random.default_rng(parts[0])
        if scheme == STRATIFIED_10_FOLD:
            folds = _stratified_folds(y, n_folds, rng)
        else:
            folds = _plain_folds(len(y), n_folds, rng)
        for k, test_idx in enumerate(folds):
            train_mask = np.ones(len(y), dtype=bool)
            train_mask[test_idx] = False
            model = fit(X[train_mask], y[train_mask], _seed_int(parts[k + 1]))
            pred = np.asarray(model.predict_batch(X[test_idx]))
            if task == TASK_CLASSIFICATION:
                values.append(float(np.mean(
                    (pred > 0.5) == (y[test_idx] > 0.5))))
            else:
                values.append(float(np.mean(np.abs(pred - y[test_idx]))))
    metric = "accuracy" if task == TASK_CLASSIFICATION else "mae_ms"
    return _metrics_report(metric, values, n_folds, n_repeats)


def forest_fit_function(task: str, config: ForestConfig,
                        feature_names: Sequence[str] | None = None,
                        n_jobs: int = 1) -> FitFunction:
    """Adapter: a forest config as a cross_validate fit function."""

    def fit(X: np.ndarray, y: np.ndarray, fold_seed: int):
        cfg = replace(config, seed=fold_seed)
        forest = fit_forest(X, y, task, cfg, feature_names, n_jobs)
        return _ForestPredictor(forest)

    return fit


class _ForestPredictor:
    def __init__(self, forest: Forest):
        self.forest = forest

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return predict_batch(self.forest, X)


@dataclass(frozen=True)
class SearchResult:
    best_config: ForestConfig
    best_score: float            # accuracy, or negated MAE
    trials: tuple[tuple[ForestConfig, float], ...]


def random_search(X: np.ndarray, y: np.ndarray, task: str,
                  space: dict[str, tuple] | None = None, budget: int = 20,
                  seed: int = 0, n_folds: int = 10,
                  n_repeats: int = 1, n_jobs: int = 1) -> SearchResult:
    """Uniform random draws from the config grid, scored by CV.

    The score is mean fold accuracy (classification) or negated mean MAE
    (regression); the best strictly-greater score wins, so ties keep the
    first-sampled config. Trial results are returned for inspection.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    space = dict(DEFAULT_SEARCH_SPACE if space is None else space)
    scheme = (STRATIFIED_10_FOLD if task == TASK_CLASSIFICATION
              else REPEATED_10_FOLD)
    rng = np.random.default_rng(seed)
    trial_seeds = np.random.SeedSequence(seed).spawn(budget)

    trials: list[tuple[ForestConfig, float]] = []
    best: tuple[ForestConfig, float] | None = None
    for i in range(budget):
        drawn = {k: space[k][int(rng.integers(len(space[k])))]
                 for k in sorted(space)}
        config = ForestConfig(**drawn, seed=_seed_int(trial_seeds[i]))
        report = cross_validate(
            X, y, forest_fit_function(task, config, n_jobs=n_jobs), task,
            scheme, seed=_seed_int(trial_seeds[i]), n_folds=n_folds,
            n_repeats=n_repeats)
        score = report.mean if task == TASK_CLASSIFICATION else -report.mean
        trials.append((config, score))
        if best is None or score > best[1]:
            best = (config, score)
    return SearchResult(best_config=best[0], best_score=best[1],
                        trials=tuple(trials))


# ---------------------------------------------------------------------------
# Forest serialization (bit-exact round trip)
# ---------------------------------------------------------------------------

def forest_to_doc(forest: Forest) -> dict:
    trees = []
    for flat in forest.flats():
        trees.append({
            "children_left": flat.children_left.tolist(),
            "children_right": flat.children_right.tolist(),
            "feature": flat.feature.tolist(),
            "threshold": flat.threshold.tolist(),
            "value": flat.value.tolist(),
            "cover": flat.cover.tolist(),
        })
    cfg = forest.config
    return {
        "version": FOREST_DOC_VERSION,
        "task": forest.task,
        "feature_names": list(forest.feature_names),
        "config": {
            "n_estimators": cfg.n_estimators,
            "max_depth": cfg.max_depth,
            "min_samples_split": cfg.min_samples_split,
            "min_samples_leaf": cfg.min_samples_leaf,
            "bootstrap": cfg.bootstrap,
            "max_features": cfg.max_features,
            "seed": cfg.seed,
        },
        "trees": trees,
    }


def _rebuild_node(t: dict, i: int) -> TreeNode:
    node = TreeNode(
        value=float(t["value"][i]),
        cover=float(t["cover"][i]),
        feature_index=int(t["feature"][i]),
        threshold=float(t["threshold"][i]),
    )
    if node.feature_index >= 0:
        node.left = _rebuild_node(t, int(t["children_left"][i]))
        node.right = _rebuild_node(t, int(t["children_right"][i]))
    return node


def forest_from_doc(doc: dict) -> Forest:
    if doc.get("version") != FOREST_DOC_VERSION:
        raise ValueError(f"unsupported forest version {doc.get('version')!r}")
    cfg = ForestConfig(**doc["config"])
    trees = tuple(_rebuild_node(t, 0) for t in doc["trees"])
    return Forest(trees=trees, task=doc["task"], config=cfg,
                  feature_names=tuple(doc["feature_names"]))


def save_forest(forest: Forest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(forest_to_doc(forest), fh, sort_keys=True)
        fh.write("\n")


def load_forest(path: str | Path) -> Forest:
    with open(path, encoding="utf-8") as fh:
        return forest_from_doc(json.load(fh))


def forest_hash(forest: Forest) -> str:
    """Stable content hash; doubles as the served model version."""
    blob = json.dumps(forest_to_doc(forest), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
