"""
Domain types shared by every part of the app: multiview datasets, vote
weights, margin matrices and the trained double-weighted majority vote.

Everything here is immutable after construction (arrays are flagged
read-only), so instances can be handed to joblib workers as-is.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Optional, Sequence

import numpy as np

from multiview.errors import DataError

if TYPE_CHECKING:
    from multiview.services.weak_learners import VoterPool

MODEL_FORMAT_VERSION = 1

# a = (ln 2)^-1, makes the logistic surrogate touch the 0/1 loss at margin 0
LOGISTIC_SCALE = 1.0 / math.log(2.0)

SIMPLEX_ATOL = 1e-9


def _readonly(values: Any, dtype=np.float64) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class MultiviewDataset:
    """m labelled observations, each described by V feature vectors."""

    views: tuple[np.ndarray, ...]
    labels: np.ndarray
    view_names: tuple[str, ...] = ()

    def __post_init__(self):
        views = tuple(_readonly(v) for v in self.views)
        if len(views) < 2:
            raise DataError(f"a multiview dataset needs at least 2 views, got {len(views)}")

        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.size == 0:
            raise DataError("labels must be a non-empty 1-D sequence")
        if not np.all(np.isin(labels, (-1, 1))):
            raise DataError("labels must all be -1 or +1")
        m = labels.size

        for v, table in enumerate(views):
            if table.ndim != 2:
                raise DataError(f"view {v} must be a 2-D table, got {table.ndim} dimension(s)")
            if table.shape[0] != m:
                raise DataError(f"view {v} has {table.shape[0]} rows, labels have {m}")
            if table.shape[1] < 1:
                raise DataError(f"view {v} has no feature columns")

        names = tuple(str(n) for n in self.view_names) or tuple(f"view_{v + 1}" for v in range(len(views)))
        if len(names) != len(views):
            raise DataError(f"{len(names)} view names for {len(views)} views")

        object.__setattr__(self, "views", views)
        object.__setattr__(self, "labels", _readonly(labels, dtype=np.int64))
        object.__setattr__(self, "view_names", names)

    @property
    def m(self) -> int:
        return int(self.labels.size)

    @property
    def V(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(int(t.shape[1]) for t in self.views)

    def observation(self, i: int) -> tuple[np.ndarray, ...]:
        return tuple(t[i] for t in self.views)

    def subset(self, indices: Sequence[int]) -> "MultiviewDataset":
        idx = np.asarray(indices, dtype=np.intp)
        return MultiviewDataset(
            views=tuple(t[idx] for t in self.views),
            labels=self.labels[idx],
            view_names=self.view_names,
        )

    def concatenated(self) -> np.ndarray:
        """Early-fusion table: all views side by side."""
        return np.hstack(self.views)


@dataclass(frozen=True, eq=False)
class VoteWeights:
    """Voter weights pi (one vector per view) and view weights rho on the simplex."""

    pi: tuple[np.ndarray, ...]
    rho: np.ndarray

    def __post_init__(self):
        pi = tuple(_readonly(p) for p in self.pi)
        rho = _readonly(self.rho)

        if rho.ndim != 1 or rho.size != len(pi):
            raise DataError(f"rho has {rho.size} entries for {len(pi)} views")
        if any(p.ndim != 1 or p.size < 1 for p in pi):
            raise DataError("every view needs a non-empty 1-D pi vector")
        if not all(np.all(np.isfinite(p)) for p in pi):
            raise DataError("pi must be finite")
        if not np.all(np.isfinite(rho)) or np.any(rho < 0) or abs(float(rho.sum()) - 1.0) > SIMPLEX_ATOL:
            raise DataError(f"rho must lie on the probability simplex, got {rho.tolist()}")

        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def uniform(cls, n_voters: Sequence[int]) -> "VoteWeights":
        """rho = 1/V, pi_v = 1/n_v: the starting point of the training procedure."""
        V = len(n_voters)
        return cls(pi=tuple(np.full(n, 1.0 / n) for n in n_voters), rho=np.full(V, 1.0 / V))

    @property
    def V(self) -> int:
        return int(self.rho.size)

    @property
    def n_voters(self) -> tuple[int, ...]:
        return tuple(int(p.size) for p in self.pi)

    def to_dict(self) -> dict:
        return {"pi": [p.tolist() for p in self.pi], "rho": self.rho.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "VoteWeights":
        return cls(pi=tuple(np.asarray(p, dtype=np.float64) for p in payload["pi"]),
                   rho=np.asarray(payload["rho"], dtype=np.float64))


@dataclass(frozen=True, eq=False)
class MarginMatrix:
    """Per view, the m x n_v table of y_i * h_{v,j}(x_i^v), all entries in {-1, +1}."""

    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        blocks = tuple(_readonly(b) for b in self.blocks)
        if not blocks:
            raise DataError("a margin matrix needs at least one view block")
        m = blocks[0].shape[0] if blocks[0].ndim == 2 else -1
        for v, block in enumerate(blocks):
            if block.ndim != 2 or block.shape[0] != m or block.shape[1] < 1:
                raise DataError(f"margin block {v} has shape {block.shape}, expected ({m}, n_v >= 1)")
            if not np.all(np.abs(block) == 1.0):
                raise DataError(f"margin block {v} has entries outside {{-1, +1}}")
        if m < 1:
            raise DataError("margin matrix has no rows")
        object.__setattr__(self, "blocks", blocks)

    @property
    def m(self) -> int:
        return int(self.blocks[0].shape[0])

    @property
    def V(self) -> int:
        return len(self.blocks)

    @property
    def n_voters(self) -> tuple[int, ...]:
        return tuple(int(b.shape[1]) for b in self.blocks)

    def vote_margins(self, weights: VoteWeights) -> np.ndarray:
        """sum_v rho_v (M_v pi_v): y_i times the majority vote score of example i."""
        if weights.n_voters != self.n_voters:
            raise DataError(f"weights cover voters {weights.n_voters}, margin matrix has {self.n_voters}")
        margins = np.zeros(self.m)
        for block, pi_v, rho_v in zip(self.blocks, weights.pi, weights.rho):
            margins += rho_v * (block @ pi_v)
        return margins


@dataclass(frozen=True, eq=False)
class MvModel:
    """The rho-Pi weighted majority vote: trained voter pools plus both weight sets."""

    pools: "VoterPool"
    weights: VoteWeights
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pools.V != self.weights.V:
            raise DataError(f"model has {self.pools.V} voter pools but {self.weights.V} view weights")
        if self.pools.n_voters != self.weights.n_voters:
            raise DataError(f"pool sizes {self.pools.n_voters} do not match pi lengths {self.weights.n_voters}")
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def V(self) -> int:
        return self.pools.V

    @property
    def view_names(self) -> tuple[str, ...]:
        return self.pools.view_names

    def to_dict(self) -> dict:
        return {
            "version": MODEL_FORMAT_VERSION,
            "V": self.V,
            "view_names": list(self.view_names),
            "trees": self.pools.to_dict()["trees"],
            "pi": [p.tolist() for p in self.weights.pi],
            "rho": self.weights.rho.tolist(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MvModel":
        from multiview.services.weak_learners import VoterPool

        try:
            version = payload["version"]
            if version != MODEL_FORMAT_VERSION:
                raise DataError(f"unsupported model version {version!r}")
            pools = VoterPool.from_dict({"view_names": payload["view_names"], "trees": payload["trees"]})
            weights = VoteWeights.from_dict(payload)
            model = cls(pools=pools, weights=weights, metadata=payload.get("metadata", {}))
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"malformed model document: {e!r}") from e
        if model.V != payload["V"]:
            raise DataError(f"model declares V={payload['V']} but holds {model.V} views")
        return model

    def save(self, path: Path) -> Path:
        from multiview.utils.utils import dump_json

        return dump_json(self.to_dict(), path)

    @classmethod
    def load(cls, path: Path) -> "MvModel":
        from multiview.utils.utils import load_json

        payload = load_json(path)
        if not isinstance(payload, dict):
            raise DataError("model document must be a JSON object", path=path)
        try:
            return cls.from_dict(payload)
        except DataError as e:
            raise DataError(str(e), path=path) from e


# ============================================================
# Scoring
# ============================================================

def _check_views(model: MvModel, views: Sequence[np.ndarray]) -> tuple[np.ndarray, ...]:
    if len(views) != model.V:
        raise DataError(f"observation has {len(views)} views, model expects {model.V}")
    tables = tuple(np.asarray(t, dtype=np.float64) for t in views)
    for v, (table, dim) in enumerate(zip(tables, model.pools.dims)):
        if table.ndim != 2 or table.shape[1] != dim:
            raise DataError(f"view {v} ({model.view_names[v]}) has shape {table.shape}, model expects {dim} columns")
    rows = {t.shape[0] for t in tables}
    if len(rows) > 1:
        raise DataError(f"views disagree on the number of rows: {sorted(rows)}")
    return tables


def decision_scores(model: MvModel, views: Sequence[np.ndarray]) -> np.ndarray:
    """B(x) = sum_v rho_v sum_j pi_{v,j} h_{v,j}(x^v) for every row of the view tables (m may be 0)."""
    tables = _check_views(model, views)
    m = tables[0].shape[0]
    scores = np.zeros(m)
    if m == 0:
        return scores
    for v, table in enumerate(tables):
        votes = model.pools.view_predictions(v, table)
        scores += model.weights.rho[v] * (votes @ model.weights.pi[v])
    return scores


def vote_score(model: MvModel, x: Sequence[np.ndarray]) -> float:
    """Score of a single multiview observation x = (x^1, ..., x^V)."""
    rows = [np.asarray(part, dtype=np.float64).reshape(1, -1) for part in x]
    return float(decision_scores(model, rows)[0])


def predict_labels(scores: np.ndarray) -> np.ndarray:
    # sign(0) predicts +1
    return np.where(np.asarray(scores) >= 0.0, 1, -1).astype(np.int64)


def predict(model: MvModel, views: Sequence[np.ndarray]) -> np.ndarray:
    return predict_labels(decision_scores(model, views))


# ============================================================
# Risks
# ============================================================

def _margins(margins: Any) -> np.ndarray:
    z = np.asarray(margins, dtype=np.float64).ravel()
    if z.size == 0:
        raise DataError("empty dataset")
    return z


def zero_one_loss(margins: Any) -> float:
    """Fraction of margins y*B(x) <= 0; a zero margin counts as an error."""
    z = _margins(margins)
    return float(np.mean(z <= 0.0))


def logistic_loss(margins: Any) -> float:
    """(a/m) sum ln(1 + exp(-z)), a = 1/ln 2, evaluated without overflow."""
    z = _margins(margins)
    return LOGISTIC_SCALE * float(np.mean(np.logaddexp(0.0, -z)))


def dataset_margins(model: MvModel, data: MultiviewDataset) -> np.ndarray:
    return data.labels * decision_scores(model, data.views)


def zero_one_risk(model: MvModel, data: MultiviewDataset) -> float:
    return zero_one_loss(dataset_margins(model, data))


def logistic_risk(model: MvModel, data: MultiviewDataset) -> float:
    return logistic_loss(dataset_margins(model, data))


def accuracy(model: MvModel, data: MultiviewDataset, predictions: Optional[np.ndarray] = None) -> float:
    if predictions is None:
        predictions = predict(model, data.views)
    return float(np.mean(np.asarray(predictions) == data.labels))
