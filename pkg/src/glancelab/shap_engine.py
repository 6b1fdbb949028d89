"""Exact per-feature attributions for forest predictions, plus the data
behind force, beeswarm, and dependence views.

Two independent routes compute the same Shapley values:

* `brute_force_shap` enumerates every feature coalition and evaluates the
  forest's conditional expectation by path-dependent, cover-weighted
  traversal — exponential in the feature count, feasible for M <= 20, and
  simple enough to serve as the ground truth.
* `tree_shap` runs the polynomial-time path algorithm (see _treeshap) and
  must agree with the brute force to 1e-9.

Attributions are additive over trees exactly as predictions are: the forest's
phi is the mean of per-tree phi. Classification attributions live in
probability units, regression in milliseconds.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _treeshap
from .models import FlatTree, Forest, TreeNode, predict, predict_batch

MAX_BRUTE_FORCE_FEATURES = 20
LOCAL_ACCURACY_TOL = 1e-9


class ShapError(Exception):
    pass


class TooManyFeatures(ShapError):
    """Coalition enumeration would exceed 2^20 subsets."""


class MissingCover(ShapError):
    """A tree node lacks a positive cover statistic."""


class TooFewInstances(ShapError):
    """Interaction selection needs at least 20 explained instances."""


@dataclass(frozen=True)
class Explanation:
    base_value: float
    phi: np.ndarray
    model_output: float
    instance: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        gap = abs(self.base_value + float(np.sum(self.phi))
                  - self.model_output)
        if gap >= LOCAL_ACCURACY_TOL:
            raise ValueError(
                f"local accuracy violated: |base + sum(phi) - output| = {gap}")

    def as_dict(self) -> dict:
        return {
            "base_value": self.base_value,
            "model_output": self.model_output,
            "phi": dict(zip(self.feature_names,
                            (float(p) for p in self.phi))),
            "instance": dict(zip(self.feature_names,
                                 (float(v) for v in self.instance))),
        }


def _check_covers(forest: Forest) -> None:
    for flat in forest.flats():
        if flat.cover.size == 0 or np.any(~np.isfinite(flat.cover)) \
                or np.any(flat.cover <= 0):
            raise MissingCover("every node needs a positive cover")


# ---------------------------------------------------------------------------
# Brute force: explicit coalition enumeration
# ---------------------------------------------------------------------------

def _subset_weights(m: int) -> np.ndarray:
    """w[s] = s! (m-s-1)! / m! for coalition size s."""
    fact = math.factorial
    return np.array([fact(s) * fact(m - s - 1) / fact(m) for s in range(m)])


def _tree_subset_table(node: TreeNode, X: np.ndarray,
                       in_subset: np.ndarray) -> np.ndarray:
    """Conditional expectation of one tree for every (instance, subset) pair.

    in_subset[f] is a boolean row per feature over all 2^M subsets. At a
    split on f: subsets containing f follow the instance's branch; the rest
    take the cover-weighted average of both branches.
    """
    if node.is_leaf:
        return np.full((X.shape[0], in_subset.shape[1]), node.value)
    left = _tree_subset_table(node.left, X, in_subset)
    right = _tree_subset_table(node.right, X, in_subset)
    blend = (node.left.cover * left + node.right.cover * right) / node.cover
    follow = np.where((X[:, node.feature_index] <= node.threshold)[:, None],
                      left, right)
    return np.where(in_subset[node.feature_index][None, :], follow, blend)


def brute_force_shap_batch(forest: Forest, X: np.ndarray) -> list[Explanation]:
    """Literal Shapley-value computation over all coalitions, vectorized
    across instances and subsets."""
    _check_covers(forest)
    X = np.asarray(X, dtype=np.float64)
    m = forest.n_features
    if m > MAX_BRUTE_FORCE_FEATURES:
        raise TooManyFeatures(f"{m} features would need 2^{m} subsets")
    n_subsets = 1 << m
    masks = np.arange(n_subsets, dtype=np.int64)
    in_subset = np.vstack([(masks >> f) & 1 for f in range(m)]).astype(bool)
    sizes = np.array([bin(s).count("1") for s in range(n_subsets)])

    table = np.zeros((X.shape[0], n_subsets))
    for tree in forest.trees:
        table += _tree_subset_table(tree, X, in_subset)
    table /= len(forest.trees)

    w = _subset_weights(m)
    phi = np.zeros((X.shape[0], m))
    for f in range(m):
        without = masks[~in_subset[f]]
        with_f = without | (1 << f)
        phi[:, f] = np.sum(
            (table[:, with_f] - table[:, without]) * w[sizes[without]][None, :],
            axis=1)

    base = table[:, 0]
    out = table[:, n_subsets - 1]
    return [
        Explanation(base_value=float(base[i]), phi=phi[i],
                    model_output=float(out[i]), instance=X[i],
                    feature_names=forest.feature_names)
        for i in range(X.shape[0])
    ]


def brute_force_shap(forest: Forest, x: np.ndarray) -> Explanation:
    return brute_force_shap_batch(
        forest, np.asarray(x, dtype=np.float64).reshape(1, -1))[0]


# ---------------------------------------------------------------------------
# Polynomial-time path algorithm
# ---------------------------------------------------------------------------

def _expectations(flat: FlatTree) -> np.ndarray:
    """Cover-weighted node expectations; preorder puts children after
    parents, so one reverse sweep suffices."""
    e = flat.value.copy()
    for i in range(len(e) - 1, -1, -1):
        l, r = flat.children_left[i], flat.children_right[i]
        if l >= 0:
            e[i] = (flat.cover[l] * e[l] + flat.cover[r] * e[r]) / flat.cover[i]
    return e


def tree_shap_batch(forest: Forest, X: np.ndarray) -> list[Explanation]:
    _check_covers(forest)
    X = np.asarray(X, dtype=np.float64)
    flats = forest.flats()
    max_depth = max(f.max_depth for f in flats)
    buffers = _treeshap.alloc_buffers(max_depth)

    base = 0.0
    for flat in flats:
        base += _expectations(flat)[0]
    base /= len(flats)
    outputs = predict_batch(forest, X)

    out: list[Explanation] = []
    for i in range(X.shape[0]):
        phi = np.zeros(forest.n_features)
        x = np.ascontiguousarray(X[i])
        for flat in flats:
            _treeshap.tree_phi(
                flat.children_left, flat.children_right, flat.feature,
                flat.threshold, flat.value, flat.cover, flat.max_depth,
                x, phi, buffers)
        phi /= len(flats)
        out.append(Explanation(
            base_value=float(base), phi=phi,
            model_output=float(outputs[i]), instance=X[i],
            feature_names=forest.feature_names))
    return out


def tree_shap(forest: Forest, x: np.ndarray) -> Explanation:
    return tree_shap_batch(
        forest, np.asarray(x, dtype=np.float64).reshape(1, -1))[0]


# ---------------------------------------------------------------------------
# View data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ForceBar:
    feature: str
    value: float
    phi: float


@dataclass(frozen=True)
class ForceData:
    base_value: float
    model_output: float
    bars: tuple[ForceBar, ...]
    residual: float


def force_data(expl: Explanation, top_k: int | None = None) -> ForceData:
    """Nonzero contributions by descending magnitude, truncated to top_k with
    the remainder folded into a residual so the parts still sum exactly."""
    order = sorted(range(len(expl.phi)),
                   key=lambda i: (-abs(float(expl.phi[i])), i))
    nonzero = [i for i in order if expl.phi[i] != 0.0]
    cut = len(nonzero) if top_k is None else min(top_k, len(nonzero))
    bars = tuple(
        ForceBar(feature=expl.feature_names[i],
                 value=float(expl.instance[i]),
                 phi=float(expl.phi[i]))
        for i in nonzero[:cut])
    residual = float(sum(expl.phi[i] for i in nonzero[cut:]))
    return ForceData(base_value=expl.base_value,
                     model_output=expl.model_output,
                     bars=bars, residual=residual)


@dataclass(frozen=True)
class GlobalSummary:
    """SHAP values and feature values across an explained dataset."""

    feature_names: tuple[str, ...]
    phi_matrix: np.ndarray     # (n_instances, n_features)
    value_matrix: np.ndarray   # (n_instances, n_features)
    base_value: float

    def __post_init__(self):
        if self.phi_matrix.shape != self.value_matrix.shape:
            raise ValueError("phi and value matrices must align")

    @property
    def importance(self) -> np.ndarray:
        """Mean |phi| per feature."""
        return np.mean(np.abs(self.phi_matrix), axis=0)

    @property
    def ranking(self) -> tuple[int, ...]:
        """Feature indices by descending importance, ties by index."""
        return tuple(int(i) for i in
                     np.argsort(-self.importance, kind="stable"))


def explain_dataset(forest: Forest, X: np.ndarray) -> GlobalSummary:
    """tree_shap over every row, collected for the global views."""
    explanations = tree_shap_batch(forest, X)
    return GlobalSummary(
        feature_names=forest.feature_names,
        phi_matrix=np.vstack([e.phi for e in explanations]),
        value_matrix=np.asarray(X, dtype=np.float64).copy(),
        base_value=explanations[0].base_value if explanations else 0.0,
    )


@dataclass(frozen=True)
class BeeswarmRow:
    feature: str
    phi: tuple[float, ...]
    values: tuple[float, ...]


def beeswarm_data(summary: GlobalSummary, top_k: int = 19) -> list[BeeswarmRow]:
    """Per-feature dot rows for the most important top_k features."""
    rows = []
    for i in summary.ranking[:top_k]:
        rows.append(BeeswarmRow(
            feature=summary.feature_names[i],
            phi=tuple(float(v) for v in summary.phi_matrix[:, i]),
            values=tuple(float(v) for v in summary.value_matrix[:, i]),
        ))
    return rows


@dataclass(frozen=True)
class DependenceData:
    feature: str
    values: tuple[float, ...]
    phi: tuple[float, ...]
    color_feature: str
    color_values: tuple[float, ...]


def _interaction_score(xi: np.ndarray, phi_i: np.ndarray,
                       xj: np.ndarray) -> float:
    """Decile-bin, median-split interaction strength of feature j on phi_i."""
    edges = np.quantile(xi, np.linspace(0.1, 0.9, 9))
    bins = np.digitize(xi, edges)
    score = 0.0
    for b in range(10):
        sel = bins == b
        if np.count_nonzero(sel) < 2:
            continue
        med = np.median(xj[sel])
        high = sel & (xj > med)
        low = sel & (xj <= med)
        if not high.any() or not low.any():
            continue
        score += abs(float(np.mean(phi_i[high]) - np.mean(phi_i[low])))
    return score


def dependence_data(summary: GlobalSummary, feature: int | str
                    ) -> DependenceData:
    """Scatter data for one feature, colored by its strongest interaction.

    The coloring feature maximizes the decile-bin median-split score; ties go
    to the lowest feature index. Needs at least 20 explained instances.
    """
    if isinstance(feature, str):
        if feature not in summary.feature_names:
            raise KeyError(f"unknown feature {feature!r}")
        i = summary.feature_names.index(feature)
    else:
        i = int(feature)
    n = summary.phi_matrix.shape[0]
    if n < 20:
        raise TooFewInstances(
            f"{n} instances; interaction selection needs >= 20")
    xi = summary.value_matrix[:, i]
    phi_i = summary.phi_matrix[:, i]
    best_j, best_score = None, -1.0
    for j in range(len(summary.feature_names)):
        if j == i:
            continue
        score = _interaction_score(xi, phi_i, summary.value_matrix[:, j])
        if score > best_score:
            best_j, best_score = j, score
    return DependenceData(
        feature=summary.feature_names[i],
        values=tuple(float(v) for v in xi),
        phi=tuple(float(v) for v in phi_i),
        color_feature=summary.feature_names[best_j],
        color_values=tuple(float(v) for v in summary.value_matrix[:, best_j]),
    )


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def explanation_to_doc(expl: Explanation, units: str = "") -> dict:
    doc = expl.as_dict()
    if units:
        doc["units"] = units
    return doc


def export_explanation(expl: Explanation, path: str | Path,
                       units: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(explanation_to_doc(expl, units), fh, sort_keys=True,
                  indent=2)
        fh.write("\n")
