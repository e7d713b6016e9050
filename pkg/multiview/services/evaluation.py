# multiview/services/evaluation.py

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn import metrics

from multiview.core import MultiviewDataset, MvModel, VoteWeights, predict
from multiview.errors import DataError, UsageError
from multiview.services.datasets import MulticlassDataset, SplitSpec, split_dataset, stratified_split
from multiview.services.trainer import TrainConfig, fit
from multiview.services.weak_learners import build_pool, default_depths, train_tree
from multiview.utils.utils import dump_json, rep_seed

logger = logging.getLogger(__name__)

BASELINES = ("mono", "concat", "fusion", "mv_uniform")
METHODS = BASELINES + ("mwmvc2",)
FUSION_TRAIN_SHARE = 0.6
METRIC_COLUMNS = ("accuracy", "f1")

Predictor = Callable[[MultiviewDataset], np.ndarray]


# ============================================================
# Metrics
# ============================================================

def _check_pair(predictions: Any, labels: Any) -> tuple[np.ndarray, np.ndarray]:
    predictions = np.asarray(predictions).ravel()
    labels = np.asarray(labels).ravel()
    if predictions.size != labels.size:
        raise DataError(f"{predictions.size} predictions for {labels.size} labels")
    if labels.size == 0:
        raise DataError("cannot score an empty evaluation set")
    return predictions, labels


def f1_score(predictions: Any, labels: Any) -> float:
    """F1 of the +1 class; 0.0 when there are no true positives."""
    predictions, labels = _check_pair(predictions, labels)
    # restricting to label 1 gives the binary F1 even when one class is absent
    return float(metrics.f1_score(labels, predictions, labels=[1], average="micro", zero_division=0))


def accuracy(predictions: Any, labels: Any) -> float:
    predictions, labels = _check_pair(predictions, labels)
    return float(metrics.accuracy_score(labels, predictions))


def _std(values: Sequence[float]) -> float:
    # sample std; a single repetition has no spread to report
    return float(np.std(values, ddof=1)) if len(values) >= 2 else 0.0


@dataclass
class MetricReport:
    """Per-repetition accuracy and F1 of one method on one task."""

    accuracy: list[float] = field(default_factory=list)
    f1: list[float] = field(default_factory=list)

    @property
    def repetitions(self) -> int:
        return len(self.accuracy)

    @property
    def accuracy_mean(self) -> float:
        return float(np.mean(self.accuracy))

    @property
    def accuracy_std(self) -> float:
        return _std(self.accuracy)

    @property
    def f1_mean(self) -> float:
        return float(np.mean(self.f1))

    @property
    def f1_std(self) -> float:
        return _std(self.f1)

    def to_dict(self) -> dict:
        return {
            "repetitions": self.repetitions,
            "accuracy": {"mean": self.accuracy_mean, "std": self.accuracy_std, "values": list(self.accuracy)},
            "f1": {"mean": self.f1_mean, "std": self.f1_std, "values": list(self.f1)},
        }


# ============================================================
# Methods
# ============================================================

@dataclass(frozen=True)
class ExperimentConfig:
    """
    train: trainer settings for mwmvc2 (its seed is replaced per repetition).
    depths: pool depth schedule; None means default_depths(m_train).
    baseline_depth: depth of the single trees used by mono, concat and fusion;
      None means the deepest depth of the default schedule.
    """

    train: TrainConfig = field(default_factory=TrainConfig)
    depths: Optional[tuple[int, ...]] = None
    baseline_depth: Optional[int] = None
    n_jobs: int = 1

    def __post_init__(self):
        if self.depths is not None:
            if not self.depths or any(int(d) < 1 for d in self.depths):
                raise UsageError(f"depths must be a non-empty list of integers >= 1, got {self.depths}")
            object.__setattr__(self, "depths", tuple(int(d) for d in self.depths))
        if self.baseline_depth is not None and int(self.baseline_depth) < 1:
            raise UsageError(f"baseline_depth must be >= 1, got {self.baseline_depth}")

    def pool_depths(self, m: int) -> list[int]:
        return list(self.depths) if self.depths is not None else default_depths(m)

    def tree_depth(self, m: int) -> int:
        return int(self.baseline_depth) if self.baseline_depth is not None else default_depths(m)[-1]


def _fit_mono(train: MultiviewDataset, cfg: ExperimentConfig, seed: int) -> Predictor:
    depth = cfg.tree_depth(train.m)
    trees = [train_tree(view, train.labels, depth, rng_seed=seed) for view in train.views]
    scores = [accuracy(tree.predict(view), train.labels) for tree, view in zip(trees, train.views)]
    best = int(np.argmax(scores))  # first view on ties
    logger.debug("[mono] training accuracies %s, picked view %r", np.round(scores, 4).tolist(), train.view_names[best])
    return lambda data: trees[best].predict(data.views[best])


def _fit_concat(train: MultiviewDataset, cfg: ExperimentConfig, seed: int) -> Predictor:
    tree = train_tree(train.concatenated(), train.labels, cfg.tree_depth(train.m), rng_seed=seed)
    return lambda data: tree.predict(data.concatenated())


def _fit_fusion(train: MultiviewDataset, cfg: ExperimentConfig, seed: int) -> Predictor:
    """Late fusion: view trees on 60% of the sample, a meta tree on their votes over the other 40%."""
    depth = cfg.tree_depth(train.m)
    if train.m >= 2:
        first, second = stratified_split(np.arange(train.m), train.labels, seed, train_size=FUSION_TRAIN_SHARE)
    else:
        first = second = np.arange(train.m)
    base, meta_part = train.subset(first), train.subset(second)

    trees = [train_tree(view, base.labels, depth, rng_seed=seed) for view in base.views]

    def votes(data: MultiviewDataset) -> np.ndarray:
        return np.column_stack([tree.predict(view) for tree, view in zip(trees, data.views)])

    meta = train_tree(votes(meta_part), meta_part.labels, depth, rng_seed=seed)
    return lambda data: meta.predict(votes(data))


def _fit_vote(train: MultiviewDataset, cfg: ExperimentConfig, seed: int, learn_weights: bool) -> Predictor:
    pool = build_pool(train, cfg.pool_depths(train.m), seed=seed)
    if learn_weights:
        model, _ = fit(train, pool, replace(cfg.train, seed=seed, n_jobs=1))
    else:
        model = MvModel(pools=pool, weights=VoteWeights.uniform(pool.n_voters), metadata={"uniform": True})
    return lambda data: predict(model, data.views)


def fit_method(method: str, train: MultiviewDataset, cfg: ExperimentConfig, seed: int) -> Predictor:
    """Train `method` on `train`; the returned callable labels any dataset with the same views."""
    if method == "mono":
        return _fit_mono(train, cfg, seed)
    if method == "concat":
        return _fit_concat(train, cfg, seed)
    if method == "fusion":
        return _fit_fusion(train, cfg, seed)
    if method == "mv_uniform":
        return _fit_vote(train, cfg, seed, learn_weights=False)
    if method == "mwmvc2":
        return _fit_vote(train, cfg, seed, learn_weights=True)
    raise UsageError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


# ============================================================
# Repeated splits
# ============================================================

def _run_repetition(method: str, data: MulticlassDataset, positive_class: Any, spec: SplitSpec, rep: int,
                    cfg: ExperimentConfig, m_train: Optional[int]) -> tuple[float, float]:
    split = split_dataset(data, positive_class, spec, rep, m_train=m_train)
    predictor = fit_method(method, split.train, cfg, rep_seed(spec.seed, rep))
    predictions = predictor(split.test)
    scores = accuracy(predictions, split.test.labels), f1_score(predictions, split.test.labels)
    logger.debug("[eval] method=%s class=%s m=%d rep=%d accuracy=%.4f f1=%.4f",
                 method, positive_class, split.train.m, rep, *scores)
    return scores


def run_method(method: str, data: MulticlassDataset, positive_class: Any, spec: SplitSpec,
               cfg: ExperimentConfig, m_train: Optional[int] = None) -> MetricReport:
    """
    `spec.repetitions` seeded splits of `data`, one fit of `method` each.
    Repetitions run in parallel; results come back in repetition order.
    """
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    results = Parallel(n_jobs=cfg.n_jobs)(
        delayed(_run_repetition)(method, data, positive_class, spec, rep, cfg, m_train)
        for rep in range(spec.repetitions)
    )
    return MetricReport(accuracy=[r[0] for r in results], f1=[r[1] for r in results])


def run_baseline(kind: str, data: MulticlassDataset, positive_class: Any, spec: SplitSpec,
                 cfg: ExperimentConfig) -> MetricReport:
    if kind not in BASELINES:
        raise UsageError(f"unknown baseline {kind!r}; choose from {', '.join(BASELINES)}")
    return run_method(kind, data, positive_class, spec, cfg)


def aggregate(raw: pd.DataFrame, keys: Sequence[str]) -> pd.DataFrame:
    """Mean and sample std of accuracy and F1 per group, groups in first-seen order."""
    grouped = raw.groupby(list(keys), sort=False)
    table = grouped[list(METRIC_COLUMNS)].agg(["mean", "std", "count"])
    table.columns = [f"{metric}_{stat}" for metric, stat in table.columns]
    table = table.reset_index()
    for metric in METRIC_COLUMNS:
        # a single repetition has no spread
        table[f"{metric}_std"] = table[f"{metric}_std"].fillna(0.0)
    table = table.rename(columns={"accuracy_count": "repetitions"}).drop(columns=["f1_count"])
    return table


def evaluate_methods(data: MulticlassDataset, positive_classes: Sequence[Any], methods: Sequence[str],
                     spec: SplitSpec, cfg: ExperimentConfig) -> tuple[pd.DataFrame, dict]:
    """
    Every method on every one-vs-rest task. Returns the raw table
    (method, positive_class, rep, accuracy, f1) and a summary with per-class
    reports and macro averages over classes.
    """
    rows, per_class = [], {}
    for method in methods:
        per_class[method] = {}
        for positive in positive_classes:
            report = run_method(method, data, positive, spec, cfg)
            per_class[method][str(positive)] = report.to_dict()
            rows.extend(
                {"method": method, "positive_class": str(positive), "rep": rep, "accuracy": a, "f1": f}
                for rep, (a, f) in enumerate(zip(report.accuracy, report.f1))
            )
            logger.info("[eval] method=%s class=%s accuracy=%.4f±%.4f f1=%.4f±%.4f", method, positive,
                        report.accuracy_mean, report.accuracy_std, report.f1_mean, report.f1_std)

    raw = pd.DataFrame(rows, columns=["method", "positive_class", "rep", *METRIC_COLUMNS])
    summary = {
        "per_class": per_class,
        "macro": {
            method: {
                metric: float(np.mean([per_class[method][c][metric]["mean"] for c in per_class[method]]))
                for metric in METRIC_COLUMNS
            }
            for method in methods
        },
        "classes": [str(c) for c in positive_classes],
        "repetitions": spec.repetitions,
    }
    return raw, summary


def curve_limit(data: MulticlassDataset, positive_class: Any, spec: SplitSpec) -> int:
    """Largest training size every repetition's balanced pool can supply."""
    return min(
        split_dataset(data, positive_class, spec, rep, m_train=1).available
        for rep in range(spec.repetitions)
    )


def learning_curve(data: MulticlassDataset, positive_class: Any, sizes: Sequence[int], methods: Sequence[str],
                   spec: SplitSpec, cfg: ExperimentConfig) -> pd.DataFrame:
    """
    Accuracy and F1 of each method at each training size over
    spec.repetitions seeded resamples: one row per (method, m, rep).
    """
    sizes = [int(s) for s in sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise UsageError(f"sizes must be a non-empty list of integers >= 1, got {sizes}")
    limit = curve_limit(data, positive_class, spec)
    too_large = [s for s in sizes if s > limit]
    if too_large:
        raise DataError(f"training sizes {too_large} exceed the available training pool (limit {limit})")

    rows = []
    for method in methods:
        for size in sizes:
            report = run_method(method, data, positive_class, spec, cfg, m_train=size)
            for rep, (a, f) in enumerate(zip(report.accuracy, report.f1)):
                rows.append({"method": method, "m": size, "rep": rep, "accuracy": a, "f1": f})
            logger.info("[curve] method=%s m=%d accuracy=%.4f f1=%.4f", method, size,
                        report.accuracy_mean, report.f1_mean)
    return pd.DataFrame(rows, columns=["method", "m", "rep", *METRIC_COLUMNS])


def write_results(raw: pd.DataFrame, aggregated: pd.DataFrame, out_dir: Path,
                  summary: Optional[dict] = None) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"raw": out_dir / "raw.csv", "aggregate": out_dir / "aggregate.csv"}
    raw.to_csv(paths["raw"], index=False, float_format="%.17g", lineterminator="\n")
    aggregated.to_csv(paths["aggregate"], index=False, float_format="%.17g", lineterminator="\n")
    if summary is not None:
        paths["summary"] = dump_json(summary, out_dir / "summary.json")
    return paths
