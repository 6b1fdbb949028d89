"""Polynomial-time exact Shapley attribution kernel for a single tree.

Recursive path algorithm over flattened tree arrays: walk every root-to-leaf
path once, maintaining for each feature on the path the fraction of subsets
that flow through when the feature is out of the coalition (cover ratio) and
when it is in (one if the instance follows this branch, zero otherwise),
together with permutation weights that are extended and unwound as features
enter and leave the path. Cost is quadratic in depth per leaf instead of
exponential in the feature count.

The functions are compiled with numba when it is importable; the pure-Python
definitions are kept as a fallback so the package works (slowly) without it.
Split convention matches the tree builder: x[feature] <= threshold goes left.
"""
from __future__ import annotations

import numpy as np

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - exercised via fallback tests
    _njit = None


def _extend_path(fi, zf, of, pw, unique_depth, zero_fraction, one_fraction,
                 feature_index):
    fi[unique_depth] = feature_index
    zf[unique_depth] = zero_fraction
    of[unique_depth] = one_fraction
    pw[unique_depth] = 1.0 if unique_depth == 0 else 0.0
    for i in range(unique_depth - 1, -1, -1):
        pw[i + 1] += one_fraction * pw[i] * (i + 1) / (unique_depth + 1)
        pw[i] = zero_fraction * pw[i] * (unique_depth - i) / (unique_depth + 1)


def _unwind_path(fi, zf, of, pw, unique_depth, path_index):
    one_fraction = of[path_index]
    zero_fraction = zf[path_index]
    next_one = pw[unique_depth]
    if one_fraction != 0.0:
        for i in range(unique_depth - 1, -1, -1):
            tmp = pw[i]
            pw[i] = next_one * (unique_depth + 1) / ((i + 1) * one_fraction)
            next_one = (tmp - pw[i] * zero_fraction * (unique_depth - i)
                        / (unique_depth + 1))
    else:
        for i in range(unique_depth - 1, -1, -1):
            pw[i] = pw[i] * (unique_depth + 1) / (zero_fraction
                                                  * (unique_depth - i))
    for i in range(path_index, unique_depth):
        fi[i] = fi[i + 1]
        zf[i] = zf[i + 1]
        of[i] = of[i + 1]


def _unwound_path_sum(fi, zf, of, pw, unique_depth, path_index):
    one_fraction = of[path_index]
    zero_fraction = zf[path_index]
    next_one = pw[unique_depth]
    total = 0.0
    if one_fraction != 0.0:
        for i in range(unique_depth - 1, -1, -1):
            tmp = next_one / ((i + 1) * one_fraction)
            total += tmp
            next_one = pw[i] - tmp * zero_fraction * (unique_depth - i)
    else:
        for i in range(unique_depth - 1, -1, -1):
            total += pw[i] / (zero_fraction * (unique_depth - i))
    return total * (unique_depth + 1)


def _shap_recurse(children_left, children_right, feature, threshold, value,
                  cover, x, phi, node, unique_depth,
                  parent_fi, parent_zf, parent_of, parent_pw,
                  parent_zero_fraction, parent_one_fraction,
                  parent_feature_index):
    # each recursion level works on a fresh slice of the shared buffers
    fi = parent_fi[unique_depth + 1:]
    fi[:unique_depth + 1] = parent_fi[:unique_depth + 1]
    zf = parent_zf[unique_depth + 1:]
    zf[:unique_depth + 1] = parent_zf[:unique_depth + 1]
    of = parent_of[unique_depth + 1:]
    of[:unique_depth + 1] = parent_of[:unique_depth + 1]
    pw = parent_pw[unique_depth + 1:]
    pw[:unique_depth + 1] = parent_pw[:unique_depth + 1]

    _extend_path(fi, zf, of, pw, unique_depth,
                 parent_zero_fraction, parent_one_fraction,
                 parent_feature_index)

    if children_left[node] < 0:  # leaf
        for i in range(1, unique_depth + 1):
            w = _unwound_path_sum(fi, zf, of, pw, unique_depth, i)
            phi[fi[i]] += w * (of[i] - zf[i]) * value[node]
        return

    split = feature[node]
    cl = children_left[node]
    cr = children_right[node]
    hot = cl if x[split] <= threshold[node] else cr
    cold = cr if hot == cl else cl
    w = cover[node]
    hot_zero = cover[hot] / w
    cold_zero = cover[cold] / w
    incoming_zero = 1.0
    incoming_one = 1.0

    # a repeated split on the same feature replaces its path entry
    path_index = 0
    while path_index <= unique_depth:
        if fi[path_index] == split:
            break
        path_index += 1
    if path_index != unique_depth + 1:
        incoming_zero = zf[path_index]
        incoming_one = of[path_index]
        _unwind_path(fi, zf, of, pw, unique_depth, path_index)
        unique_depth -= 1

    _shap_recurse(children_left, children_right, feature, threshold, value,
                  cover, x, phi, hot, unique_depth + 1, fi, zf, of, pw,
                  hot_zero * incoming_zero, incoming_one, split)
    _shap_recurse(children_left, children_right, feature, threshold, value,
                  cover, x, phi, cold, unique_depth + 1, fi, zf, of, pw,
                  cold_zero * incoming_zero, 0.0, split)


if _njit is not None:
    _extend_path = _njit(cache=True)(_extend_path)
    _unwind_path = _njit(cache=True)(_unwind_path)
    _unwound_path_sum = _njit(cache=True)(_unwound_path_sum)
    _shap_recurse = _njit(cache=True)(_shap_recurse)

JITTED = _njit is not None


def alloc_buffers(max_depth: int):
    """Scratch arrays for tree_phi, size (d+2)(d+3)/2; reusable across calls
    on trees no deeper than max_depth (the kernel writes before it reads)."""
    size = max_depth + 2
    buf = (size * (size + 1)) // 2
    return (np.full(buf, -1, dtype=np.int64),
            np.zeros(buf, dtype=np.float64),
            np.zeros(buf, dtype=np.float64),
            np.zeros(buf, dtype=np.float64))


def tree_phi(children_left: np.ndarray, children_right: np.ndarray,
             feature: np.ndarray, threshold: np.ndarray, value: np.ndarray,
             cover: np.ndarray, max_depth: int, x: np.ndarray,
             phi: np.ndarray, buffers=None) -> None:
    """Accumulate one tree's attributions for instance x into phi."""
    fi, zf, of, pw = buffers if buffers is not None else alloc_buffers(max_depth)
    _shap_recurse(children_left, children_right, feature, threshold, value,
                  cover, x, phi, 0, 0, fi, zf, of, pw, 1.0, 1.0, -1)
