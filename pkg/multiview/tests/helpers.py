import numpy as np

from multiview.core import MultiviewDataset, MvModel, VoteWeights
from multiview.services.weak_learners import DecisionTree, VoterPool


def constant_pool(outputs, dims=None):
    """Pool of constant trees: outputs[v][j] is the label voter j of view v always returns."""
    dims = dims or [1] * len(outputs)
    return VoterPool(
        trees=tuple(tuple(DecisionTree.constant(o, d) for o in view) for view, d in zip(outputs, dims)),
        depths=tuple(tuple(1 for _ in view) for view in outputs),
    )


def constant_model(outputs, rho, pi, dims=None):
    return MvModel(
        pools=constant_pool(outputs, dims),
        weights=VoteWeights(pi=tuple(np.asarray(p, dtype=float) for p in pi), rho=np.asarray(rho, dtype=float)),
    )


def separable_dataset(m=12, seed=0):
    """Two views; view 0 separates the classes on its first column, view 1 is noise."""
    rng = np.random.default_rng(seed)
    labels = np.where(np.arange(m) % 2 == 0, 1, -1)
    left = np.column_stack([labels * (1.0 + rng.random(m)), rng.standard_normal(m)])
    right = rng.standard_normal((m, 1))
    return MultiviewDataset(views=(left, right), labels=labels, view_names=("left", "right"))
