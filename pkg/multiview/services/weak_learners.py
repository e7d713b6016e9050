# multiview/services/weak_learners.py

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from sklearn.tree import DecisionTreeClassifier

from multiview.core import MarginMatrix, MultiviewDataset
from multiview.errors import DataError, UsageError

logger = logging.getLogger(__name__)

LEAF = -1


def default_depths(m: int) -> list[int]:
    """
    Depth schedule 1..max_d - 2 with max_d = ceil(log2 m) + 1, clamped so that
    at least depth 1 is always trained.
    """
    if m < 1:
        raise UsageError(f"need at least one example to pick tree depths, got m={m}")
    max_d = math.ceil(math.log2(m)) + 1
    return list(range(1, max(1, max_d - 2) + 1))


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """
    Axis-aligned binary tree stored as parallel node arrays (node 0 is the
    root). Internal nodes send x[feature] <= threshold to `left`; leaves
    carry a label in {-1, +1}.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray
    n_features: int
    max_depth: int

    def __post_init__(self):
        arrays = {}
        for name, dtype in (("feature", np.int64), ("threshold", np.float64), ("left", np.int64),
                            ("right", np.int64), ("label", np.int64)):
            a = np.array(getattr(self, name), dtype=dtype, copy=True)
            a.flags.writeable = False
            arrays[name] = a
        n_nodes = arrays["feature"].size
        if n_nodes < 1 or any(a.shape != (n_nodes,) for a in arrays.values()):
            raise DataError("tree node arrays must be non-empty and of equal length")
        leaves = arrays["left"] == LEAF
        if not np.all(np.isin(arrays["label"][leaves], (-1, 1))):
            raise DataError("tree leaves must be labelled -1 or +1")
        if np.any(arrays["feature"][~leaves] < 0) or np.any(arrays["feature"][~leaves] >= self.n_features):
            raise DataError(f"tree splits on a feature outside 0..{self.n_features - 1}")
        if self.max_depth < 1:
            raise DataError(f"max_depth must be >= 1, got {self.max_depth}")
        for name, a in arrays.items():
            object.__setattr__(self, name, a)
        if self.depth > self.max_depth:
            raise DataError(f"tree depth {self.depth} exceeds max_depth {self.max_depth}")

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def depth(self) -> int:
        """Length of the longest root-to-leaf path."""
        deepest = 0
        stack = [(0, 0)]
        while stack:
            node, d = stack.pop()
            if self.left[node] == LEAF:
                deepest = max(deepest, d)
            else:
                stack.append((int(self.left[node]), d + 1))
                stack.append((int(self.right[node]), d + 1))
        return deepest

    def predict(self, features: Any) -> np.ndarray:
        """Labels in {-1, +1} for every row of an m x n_features table."""
        X = np.asarray(features)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DataError(f"tree expects {self.n_features} features, got table of shape {X.shape}")
        # the learner fits on float32 copies of the features
        X = X.astype(np.float32)
        node = np.zeros(X.shape[0], dtype=np.int64)
        for _ in range(self.depth):
            active = np.nonzero(self.left[node] != LEAF)[0]
            if active.size == 0:
                break
            at = node[active]
            go_left = X[active, self.feature[at]] <= self.threshold[at]
            node[active] = np.where(go_left, self.left[at], self.right[at])
        return self.label[node]

    # ---- serialization ----

    def _node_record(self, node: int) -> dict:
        if self.left[node] == LEAF:
            return {"leaf": int(self.label[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self._node_record(int(self.left[node])),
            "right": self._node_record(int(self.right[node])),
        }

    def to_dict(self) -> dict:
        return {"n_features": self.n_features, "max_depth": self.max_depth, "root": self._node_record(0)}

    @classmethod
    def from_dict(cls, payload: dict) -> "DecisionTree":
        columns: dict[str, list] = {"feature": [], "threshold": [], "left": [], "right": [], "label": []}

        def add(record: dict) -> int:
            index = len(columns["feature"])
            for values in columns.values():
                values.append(None)
            if "leaf" in record:
                columns["feature"][index] = LEAF
                columns["threshold"][index] = math.nan
                columns["left"][index] = LEAF
                columns["right"][index] = LEAF
                columns["label"][index] = int(record["leaf"])
                return index
            columns["feature"][index] = int(record["feature"])
            columns["threshold"][index] = float(record["threshold"])
            columns["label"][index] = 0
            columns["left"][index] = add(record["left"])
            columns["right"][index] = add(record["right"])
            return index

        add(payload["root"])
        return cls(n_features=int(payload["n_features"]), max_depth=int(payload["max_depth"]), **columns)

    # ---- hand-built trees ----

    @classmethod
    def constant(cls, label: int, n_features: int, max_depth: int = 1) -> "DecisionTree":
        return cls(feature=[LEAF], threshold=[math.nan], left=[LEAF], right=[LEAF], label=[label],
                   n_features=n_features, max_depth=max_depth)

    @classmethod
    def stump(cls, feature: int, threshold: float, left_label: int, right_label: int,
              n_features: int) -> "DecisionTree":
        return cls(feature=[feature, LEAF, LEAF], threshold=[threshold, math.nan, math.nan],
                   left=[1, LEAF, LEAF], right=[2, LEAF, LEAF], label=[0, left_label, right_label],
                   n_features=n_features, max_depth=1)


def train_tree(features: Any, labels: Any, max_depth: int, rng_seed: int = 0) -> DecisionTree:
    """
    Greedy CART induction with Gini impurity, midpoint thresholds, no pruning.
    Leaves take the majority label, ties going to +1. Deterministic for a
    given input order and seed; the seed fixes the learner's feature order,
    which is what breaks exact impurity ties.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise DataError(f"cannot train a tree on an empty table (shape {X.shape})")
    if y.shape != (X.shape[0],):
        raise DataError(f"{X.shape[0]} rows but {y.size} labels")
    if not np.all(np.isin(y, (-1, 1))):
        raise DataError("tree labels must be -1 or +1")
    if not np.all(np.isfinite(X)):
        raise DataError("features contain non-finite values")
    if int(max_depth) < 1:
        raise UsageError(f"max_depth must be >= 1, got {max_depth}")

    clf = DecisionTreeClassifier(criterion="gini", splitter="best", max_depth=int(max_depth),
                                 random_state=int(rng_seed))
    clf.fit(X, y.astype(np.int64))

    structure = clf.tree_
    counts = structure.value[:, 0, :]
    positives = counts[:, clf.classes_ == 1].sum(axis=1)
    negatives = counts[:, clf.classes_ == -1].sum(axis=1)
    is_leaf = structure.children_left == LEAF

    return DecisionTree(
        feature=np.where(is_leaf, LEAF, structure.feature),
        threshold=np.where(is_leaf, math.nan, structure.threshold),
        left=structure.children_left,
        right=structure.children_right,
        label=np.where(is_leaf, np.where(positives >= negatives, 1, -1), 0),
        n_features=X.shape[1],
        max_depth=int(max_depth),
    )


@dataclass(frozen=True, eq=False)
class VoterPool:
    """For each view, the ordered trees h_{v,1..n_v} and the depth each was trained at."""

    trees: tuple[tuple[DecisionTree, ...], ...]
    depths: tuple[tuple[int, ...], ...]
    view_names: tuple[str, ...] = ()

    def __post_init__(self):
        trees = tuple(tuple(view) for view in self.trees)
        depths = tuple(tuple(int(d) for d in view) for view in self.depths)
        if not trees:
            raise DataError("a voter pool needs at least one view")
        if len(depths) != len(trees):
            raise DataError(f"{len(depths)} depth lists for {len(trees)} views")
        for v, (view, view_depths) in enumerate(zip(trees, depths)):
            if not view:
                raise DataError(f"view {v} has no voters")
            if len(view) != len(view_depths):
                raise DataError(f"view {v} has {len(view)} trees but {len(view_depths)} depths")
            if len({t.n_features for t in view}) != 1:
                raise DataError(f"trees of view {v} disagree on the feature count")
        names = tuple(str(n) for n in self.view_names) or tuple(f"view_{v + 1}" for v in range(len(trees)))
        if len(names) != len(trees):
            raise DataError(f"{len(names)} view names for {len(trees)} views")
        object.__setattr__(self, "trees", trees)
        object.__setattr__(self, "depths", depths)
        object.__setattr__(self, "view_names", names)

    @property
    def V(self) -> int:
        return len(self.trees)

    @property
    def n_voters(self) -> tuple[int, ...]:
        return tuple(len(view) for view in self.trees)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(view[0].n_features for view in self.trees)

    def view_predictions(self, v: int, features: Any) -> np.ndarray:
        """m x n_v matrix of h_{v,j}(x^v) in {-1, +1}."""
        return np.column_stack([tree.predict(features) for tree in self.trees[v]])

    def to_dict(self) -> dict:
        return {
            "view_names": list(self.view_names),
            "trees": [
                [{"depth": d, "tree": tree.to_dict()} for tree, d in zip(view, view_depths)]
                for view, view_depths in zip(self.trees, self.depths)
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "VoterPool":
        return cls(
            trees=tuple(tuple(DecisionTree.from_dict(r["tree"]) for r in view) for view in payload["trees"]),
            depths=tuple(tuple(int(r["depth"]) for r in view) for view in payload["trees"]),
            view_names=tuple(payload.get("view_names") or ()),
        )


def _train_view(features: np.ndarray, labels: np.ndarray, depths: Sequence[int], seed: int) -> tuple[DecisionTree, ...]:
    return tuple(train_tree(features, labels, d, rng_seed=seed) for d in depths)


def build_pool(data: MultiviewDataset, depths: Optional[Sequence[int]] = None, seed: int = 0,
               n_jobs: int = 1) -> VoterPool:
    """
    Train one tree per requested depth on every view. Views are independent,
    so they are trained in parallel; joblib returns them in view order.
    """
    depths = list(depths) if depths is not None else default_depths(data.m)
    if not depths:
        raise UsageError("depths must not be empty")
    if any(int(d) < 1 for d in depths):
        raise UsageError(f"every depth must be >= 1, got {depths}")

    trees = Parallel(n_jobs=n_jobs)(
        delayed(_train_view)(table, data.labels, depths, seed) for table in data.views
    )
    for name, view in zip(data.view_names, trees):
        logger.debug("[pool] view %r: %d trees, depths %s", name, len(view), [t.depth for t in view])

    return VoterPool(trees=tuple(trees), depths=tuple(tuple(depths) for _ in trees), view_names=data.view_names)


def margin_matrix(pool: VoterPool, data: MultiviewDataset) -> MarginMatrix:
    """(M_v)_{ij} = y_i * h_{v,j}(x_i^v)."""
    if pool.V != data.V:
        raise DataError(f"pool has {pool.V} views, dataset has {data.V}")
    if pool.dims != data.dims:
        raise DataError(f"pool expects view dimensions {pool.dims}, dataset has {data.dims}")
    y = data.labels[:, None].astype(np.float64)
    return MarginMatrix(blocks=tuple(y * pool.view_predictions(v, data.views[v]) for v in range(pool.V)))
