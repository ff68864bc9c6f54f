"""Binary CART user model: Gini splits over normalized coordinates.

The tree is the model of user interest; its leaves are later flattened into
hyper-rectangles, so split semantics are fixed once here: ``value <= threshold``
descends left, ``> threshold`` right, thresholds at midpoints between adjacent
distinct training values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RELEVANT = "relevant"
IRRELEVANT = "irrelevant"
SIMILAR = "similar"


class TreeError(Exception):
    pass


@dataclass(frozen=True)
class LabeledSample:
    tuple_id: int
    point: np.ndarray
    label: str

    def __post_init__(self):
        if self.label not in (RELEVANT, IRRELEVANT):
            raise TreeError(f"training label must be binary, got {self.label!r}")


@dataclass(frozen=True)
class TreeParams:
    min_samples_leaf: int = 2
    max_depth: int = 20

    def validate(self):
        if self.min_samples_leaf < 1:
            raise TreeError("min_samples_leaf must be >= 1")
        if self.max_depth < 1:
            raise TreeError("max_depth must be >= 1")


@dataclass
class Node:
    """Split node (attr/threshold set) or leaf (label set)."""

    attr: int = -1
    threshold: float = 0.0
    left: "Node | None" = None
    right: "Node | None" = None
    label: str | None = None
    counts: tuple = (0, 0)  # (irrelevant, relevant) training tuples at the node

    @property
    def is_leaf(self) -> bool:
        return self.label is not None


@dataclass
class DecisionTree:
    root: Node
    d: int
    params: TreeParams
    n_samples: int
    degenerate: bool = False  # trained on a single class

    def leaf_count(self) -> int:
        def walk(node):
            if node.is_leaf:
                return 1
            return walk(node.left) + walk(node.right)

        return walk(self.root)


def _gini(n_rel: float, n_tot: float) -> float:
    if n_tot == 0:
        return 0.0
    p = n_rel / n_tot
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Exhaustive midpoint search; returns (attr, threshold, impurity) or None.

    Ties on impurity resolve to the lowest attribute index, then the lowest
    threshold, so retraining on identical input reproduces the same tree.
    """
    n = y.size
    best = None  # (impurity, attr, threshold)
    total_rel = int(y.sum())
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        vals = X[order, j]
        labs = y[order]
        cut = np.flatnonzero(vals[:-1] != vals[1:])
        if cut.size == 0:
            continue
        n_left = cut + 1
        n_right = n - n_left
        ok = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not ok.any():
            continue
        cut = cut[ok]
        n_left = n_left[ok]
        n_right = n_right[ok]
        rel_left = np.cumsum(labs)[cut]
        rel_right = total_rel - rel_left
        p_l = rel_left / n_left
        p_r = rel_right / n_right
        gini_l = 1.0 - p_l * p_l - (1.0 - p_l) * (1.0 - p_l)
        gini_r = 1.0 - p_r * p_r - (1.0 - p_r) * (1.0 - p_r)
        weighted = (n_left * gini_l + n_right * gini_r) / n
        pos = int(np.argmin(weighted))  # first minimum = lowest threshold
        if best is None or weighted[pos] < best[0] - 1e-15:
            thr = 0.5 * (vals[cut[pos]] + vals[cut[pos] + 1])
            best = (float(weighted[pos]), j, thr)
    if best is None:
        return None
    return best[1], best[2], best[0]


def _majority(y: np.ndarray) -> str:
    n_rel = int(y.sum())
    n_irr = y.size - n_rel
    # tie goes to irrelevant: an undecided area should not inflate the query
    return RELEVANT if n_rel > n_irr else IRRELEVANT


def _grow(X, y, depth, params) -> Node:
    n = y.size
    n_rel = int(y.sum())
    counts = (n - n_rel, n_rel)
    pure = n_rel == 0 or n_rel == n
    if pure or depth >= params.max_depth or n < 2 * params.min_samples_leaf:
        return Node(label=_majority(y), counts=counts)
    found = _best_split(X, y, params.min_samples_leaf)
    if found is None:
        return Node(label=_majority(y), counts=counts)
    # zero-gain splits are allowed: balanced quadrant patterns have no gainful
    # first split yet must still be separated by recursion
    attr, thr, _ = found
    mask = X[:, attr] <= thr
    left = _grow(X[mask], y[mask], depth + 1, params)
    right = _grow(X[~mask], y[~mask], depth + 1, params)
    return Node(attr=attr, threshold=thr, left=left, right=right, counts=counts)


def train(samples, params: TreeParams = TreeParams()) -> DecisionTree:
    """Grow a CART tree from labeled samples.

    A single-class sample set yields a one-leaf tree flagged ``degenerate``
    instead of an error: early exploration iterations legitimately hold only
    irrelevant labels and the discovery machinery keeps going.
    """
    params.validate()
    samples = list(samples)
    if not samples:
        raise TreeError("cannot train on zero samples")
    X = np.asarray([s.point for s in samples], dtype=np.float64)
    y = np.asarray([1 if s.label == RELEVANT else 0 for s in samples], dtype=np.int64)
    d = X.shape[1]
    n_rel = int(y.sum())
    if n_rel == 0 or n_rel == y.size:
        label = RELEVANT if n_rel else IRRELEVANT
        root = Node(label=label, counts=(y.size - n_rel, n_rel))
        return DecisionTree(root=root, d=d, params=params, n_samples=y.size, degenerate=True)
    root = _grow(X, y, 0, params)
    return DecisionTree(root=root, d=d, params=params, n_samples=y.size)


def classify(tree: DecisionTree, point) -> str:
    """Root-to-leaf descent for one point."""
    point = np.asarray(point, dtype=np.float64)
    if point.shape != (tree.d,):
        raise TreeError(f"point has shape {point.shape}, tree expects ({tree.d},)")
    node = tree.root
    while not node.is_leaf:
        node = node.left if point[node.attr] <= node.threshold else node.right
    return node.label


def classify_batch(tree: DecisionTree, points) -> np.ndarray:
    """Vectorized descent; returns a boolean relevant-mask, one per row."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != tree.d:
        raise TreeError(f"points have dim {points.shape[1]}, tree expects {tree.d}")
    out = np.zeros(points.shape[0], dtype=bool)

    def descend(node, idx):
        if idx.size == 0:
            return
        if node.is_leaf:
            if node.label == RELEVANT:
                out[idx] = True
            return
        go_left = points[idx, node.attr] <= node.threshold
        descend(node.left, idx[go_left])
        descend(node.right, idx[~go_left])

    descend(tree.root, np.arange(points.shape[0]))
    return out
