# multiview/services/datasets.py

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split

from multiview.core import MultiviewDataset
from multiview.errors import DataError, UsageError
from multiview.utils.idx import read_idx
from multiview.utils.utils import dump_json, load_json, rep_seed

logger = logging.getLogger(__name__)

MANIFEST_FORMATS = ("csv", "idx")
MANIFEST_KEYS = {"labels", "views", "positive_class", "format", "header", "seed", "overlap"}
QUARTER_NAMES = ("top_left", "top_right", "bottom_left", "bottom_right")
FLOAT_FORMAT = "%.17g"


# ============================================================
# Manifests
# ============================================================

@dataclass(frozen=True)
class ViewSpec:
    name: str
    path: Path


@dataclass(frozen=True)
class DatasetManifest:
    """
    Where a dataset lives on disk. For csv, one file per view plus a labels
    file; for idx, a single images file (split into quarters) plus labels.
    """

    labels: Optional[Path]
    views: tuple[ViewSpec, ...]
    positive_class: Optional[str] = None
    format: str = "csv"
    header: bool = False
    seed: int = 0
    overlap: Optional[float] = None  # idx only; None defers to the run configuration

    def __post_init__(self):
        if self.format not in MANIFEST_FORMATS:
            raise DataError(f"manifest format must be one of {', '.join(MANIFEST_FORMATS)}, got {self.format!r}")
        if self.format == "csv" and len(self.views) < 2:
            raise DataError(f"a csv manifest needs at least 2 views, got {len(self.views)}")
        if self.format == "idx" and len(self.views) != 1:
            raise DataError("an idx manifest names exactly one images file under 'views'")
        if self.overlap is not None and not 0.0 <= self.overlap < 0.5:
            raise DataError(f"overlap must be in [0, 0.5), got {self.overlap}")

    @classmethod
    def from_json(cls, path: Path) -> "DatasetManifest":
        path = Path(path)
        payload = load_json(path)
        if not isinstance(payload, dict):
            raise DataError("manifest must be a JSON object", path=path)
        unknown = set(payload) - MANIFEST_KEYS
        if unknown:
            raise DataError(f"unknown manifest keys: {', '.join(sorted(unknown))}", path=path)

        base = path.parent

        def resolve(p: str) -> Path:
            p = Path(p)
            return p if p.is_absolute() else base / p

        try:
            views = tuple(ViewSpec(name=str(v["name"]), path=resolve(v["path"])) for v in payload.get("views", []))
            positive = payload.get("positive_class")
            return cls(
                labels=resolve(payload["labels"]) if payload.get("labels") else None,
                views=views,
                positive_class=None if positive is None else str(positive),
                format=payload.get("format", "csv"),
                header=bool(payload.get("header", False)),
                seed=int(payload.get("seed", 0)),
                overlap=None if payload.get("overlap") is None else float(payload["overlap"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"malformed manifest entry: {e!r}", path=path) from e
        except DataError as e:
            raise DataError(str(e), path=path) from e

    def to_dict(self, relative_to: Optional[Path] = None) -> dict:
        def rel(p: Path) -> str:
            if relative_to is not None:
                try:
                    return str(Path(p).relative_to(relative_to))
                except ValueError:
                    pass
            return str(p)

        return {
            "labels": rel(self.labels) if self.labels else None,
            "views": [{"name": v.name, "path": rel(v.path)} for v in self.views],
            "positive_class": self.positive_class,
            "format": self.format,
            "header": self.header,
            "seed": self.seed,
            "overlap": self.overlap,
        }


@dataclass(frozen=True, eq=False)
class MulticlassDataset:
    """Views plus arbitrary class ids (kept as strings), before one-vs-rest binarisation."""

    views: tuple[np.ndarray, ...]
    classes: np.ndarray
    view_names: tuple[str, ...] = ()

    def __post_init__(self):
        classes = np.asarray(self.classes).astype(str)
        if classes.ndim != 1 or classes.size == 0:
            raise DataError("class labels must be a non-empty 1-D sequence")
        views = tuple(np.array(v, dtype=np.float64, copy=True) for v in self.views)
        if len(views) < 2:
            raise DataError(f"a multiview dataset needs at least 2 views, got {len(views)}")
        for v, table in enumerate(views):
            if table.ndim != 2 or table.shape[0] != classes.size or table.shape[1] < 1:
                raise DataError(f"view {v} has shape {table.shape}, expected ({classes.size}, d >= 1)")
            table.flags.writeable = False
        classes.flags.writeable = False
        names = tuple(str(n) for n in self.view_names) or tuple(f"view_{v + 1}" for v in range(len(views)))
        if len(names) != len(views):
            raise DataError(f"{len(names)} view names for {len(views)} views")
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "view_names", names)

    @property
    def m(self) -> int:
        return int(self.classes.size)

    @property
    def V(self) -> int:
        return len(self.views)

    def class_ids(self) -> list[str]:
        return sorted(set(self.classes.tolist()))

    def subset(self, indices: Sequence[int]) -> "MulticlassDataset":
        idx = np.asarray(indices, dtype=np.intp)
        return MulticlassDataset(views=tuple(t[idx] for t in self.views), classes=self.classes[idx],
                                 view_names=self.view_names)

    @classmethod
    def from_binary(cls, data: MultiviewDataset) -> "MulticlassDataset":
        """Binary labels become class ids '1' and '-1'."""
        return cls(views=data.views, classes=data.labels.astype(str), view_names=data.view_names)


# ============================================================
# Ingestion
# ============================================================

def _read_frame(path: Path, header: bool) -> Optional[pd.DataFrame]:
    if not Path(path).exists():
        raise DataError("file not found", path=path)
    try:
        return pd.read_csv(path, header=0 if header else None, dtype=str, keep_default_na=False,
                           encoding="utf-8", skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        return None
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataError(f"unreadable CSV: {e}", path=path) from e


def read_feature_table(path: Path, header: bool = False) -> np.ndarray:
    """
    Parse a comma-separated numeric table into float64. Every cell must be a
    finite number; the first offending cell is reported with its line.
    """
    frame = _read_frame(path, header)
    if frame is None or frame.empty:
        return np.empty((0, 0))
    cells = frame.to_numpy(dtype=str)
    try:
        values = cells.astype(np.float64)
    except ValueError:
        values = None
    if values is not None and np.all(np.isfinite(values)):
        return values
    offset = 2 if header else 1
    for row, col in np.ndindex(cells.shape):
        if values is not None and math.isfinite(values[row, col]):
            continue
        try:
            ok = math.isfinite(float(cells[row, col]))
        except ValueError:
            ok = False
        if not ok:
            raise DataError(f"non-numeric or non-finite cell {cells[row, col]!r} in column {col + 1}",
                            path=path, line=row + offset)
    return values


def read_labels(path: Path, header: bool = False) -> np.ndarray:
    frame = _read_frame(path, header)
    if frame is None or frame.empty:
        raise DataError("labels file is empty", path=path)
    if frame.shape[1] != 1:
        raise DataError(f"labels file must have one column, found {frame.shape[1]}", path=path)
    return np.array([s.strip() for s in frame.iloc[:, 0].tolist()], dtype=str)


def quarter_index_maps(height: int, width: int, overlap: float = 0.0) -> tuple[np.ndarray, ...]:
    """
    Flat pixel indices of the four quarters (top-left, top-right, bottom-left,
    bottom-right). With overlap o each quarter grows by floor(o*H) rows and
    floor(o*W) columns toward the image centre.
    """
    if not 0.0 <= overlap < 0.5:
        raise DataError(f"overlap must be in [0, 0.5), got {overlap}")
    if height < 2 or width < 2:
        raise DataError(f"images must be at least 2x2, got {height}x{width}")
    if overlap == 0.0 and (height % 2 or width % 2):
        raise DataError(f"disjoint quarters need even image sides, got {height}x{width}")
    h2, w2 = height // 2, width // 2
    eh, ew = math.floor(overlap * height), math.floor(overlap * width)
    top, bottom = np.arange(0, h2 + eh), np.arange(h2 - eh, height)
    left, right = np.arange(0, w2 + ew), np.arange(w2 - ew, width)
    grid = np.arange(height * width).reshape(height, width)
    return tuple(grid[np.ix_(rows, cols)].ravel() for rows, cols in
                 ((top, left), (top, right), (bottom, left), (bottom, right)))


def quarter_views(images: Any, overlap: float = 0.0, image_shape: Optional[tuple[int, int]] = None) -> tuple[np.ndarray, ...]:
    """
    Split m grey images into 4 views, one flattened quarter each. Images are
    an m x H x W array, or m x (H*W) together with image_shape=(H, W).
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 3:
        if image_shape is not None and tuple(image_shape) != images.shape[1:]:
            raise DataError(f"images are {images.shape[1:]}, image_shape says {tuple(image_shape)}")
        height, width = images.shape[1:]
    elif images.ndim == 2 and image_shape is not None:
        height, width = image_shape
        if images.shape[1] != height * width:
            raise DataError(f"rows hold {images.shape[1]} pixels, image_shape {height}x{width} needs {height * width}")
    else:
        raise DataError(f"cannot read images of shape {images.shape} without an image_shape")
    flat = images.reshape(images.shape[0], height * width)
    return tuple(flat[:, idx] for idx in quarter_index_maps(height, width, overlap))


def load_views(manifest: DatasetManifest) -> tuple[np.ndarray, ...]:
    """Feature tables only (labels are not read); used for prediction."""
    if manifest.format == "idx":
        images = read_idx(manifest.views[0].path)
        if images.ndim != 3:
            raise DataError(f"expected an m x H x W image array, got shape {images.shape}", path=manifest.views[0].path)
        return quarter_views(images, manifest.overlap or 0.0)

    tables = tuple(read_feature_table(v.path, manifest.header) for v in manifest.views)
    for spec, table in zip(manifest.views[1:], tables[1:]):
        if table.shape[0] != tables[0].shape[0]:
            raise DataError(f"{manifest.views[0].path} has {tables[0].shape[0]} rows but "
                            f"{spec.path} has {table.shape[0]}")
    return tables


def view_names(manifest: DatasetManifest) -> tuple[str, ...]:
    if manifest.format == "idx":
        return QUARTER_NAMES
    return tuple(v.name for v in manifest.views)


def load_multiclass(manifest: DatasetManifest) -> MulticlassDataset:
    if manifest.labels is None:
        raise DataError("manifest has no labels file")
    if manifest.format == "idx":
        classes = read_idx(manifest.labels)
        if classes.ndim != 1:
            raise DataError(f"expected a 1-D label array, got shape {classes.shape}", path=manifest.labels)
        classes = classes.astype(str)
    else:
        classes = read_labels(manifest.labels, manifest.header)

    tables = load_views(manifest)
    for spec, table in zip(manifest.views, tables):
        if table.shape[0] != classes.size:
            raise DataError(f"{manifest.labels} has {classes.size} rows but {spec.path} has {table.shape[0]}")
    logger.info("[data] loaded %d observations, %d views, %d classes",
                classes.size, len(tables), len(set(classes.tolist())))
    return MulticlassDataset(views=tables, classes=classes, view_names=view_names(manifest))


def load_csv_multiview(manifest: DatasetManifest) -> MultiviewDataset:
    """
    Binary dataset from a manifest: the manifest's positive class maps to +1,
    every other class id to -1. Handles csv and idx manifests alike.
    """
    if manifest.positive_class is None:
        raise DataError("manifest has no positive_class; cannot map labels to -1/+1")
    return to_binary(load_multiclass(manifest), manifest.positive_class)


def save_csv_multiview(data: MultiviewDataset | MulticlassDataset, directory: Path,
                       positive_class: Optional[str] = "1", seed: int = 0) -> Path:
    """Write one CSV per view, a labels CSV and manifest.json; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    classes = data.classes if isinstance(data, MulticlassDataset) else data.labels.astype(str)

    pd.DataFrame({"label": classes}).to_csv(directory / "labels.csv", header=False, index=False)
    views = []
    for name, table in zip(data.view_names, data.views):
        path = directory / f"{name}.csv"
        pd.DataFrame(table).to_csv(path, header=False, index=False, float_format=FLOAT_FORMAT)
        views.append(ViewSpec(name=name, path=path))

    manifest = DatasetManifest(labels=directory / "labels.csv", views=tuple(views),
                               positive_class=positive_class, seed=seed)
    return dump_json(manifest.to_dict(relative_to=directory), directory / "manifest.json")


# ============================================================
# Tasks
# ============================================================

def _class_mask(data: MulticlassDataset, positive_class: Any) -> np.ndarray:
    positive = str(positive_class)
    mask = data.classes == positive
    if not mask.any():
        raise DataError(f"class {positive!r} has no samples; available classes: {', '.join(data.class_ids())}")
    return mask


def to_binary(data: MulticlassDataset, positive_class: Any) -> MultiviewDataset:
    """One-vs-rest labels without any subsampling (test portions)."""
    mask = _class_mask(data, positive_class)
    return MultiviewDataset(views=data.views, labels=np.where(mask, 1, -1), view_names=data.view_names)


def make_task(data: MulticlassDataset, positive_class: Any, seed: int, negative_ratio: float = 1.0) -> MultiviewDataset:
    """
    One-vs-rest training task: every observation of `positive_class` is kept,
    negatives are drawn uniformly without replacement down to
    negative_ratio x (number of positives). Kept rows stay in input order.
    """
    if not negative_ratio > 0:
        raise UsageError(f"negative_ratio must be > 0, got {negative_ratio}")
    mask = _class_mask(data, positive_class)
    positives = np.flatnonzero(mask)
    negatives = np.flatnonzero(~mask)
    wanted = min(negatives.size, int(round(negative_ratio * positives.size)))

    rng = np.random.default_rng(seed)
    chosen = rng.choice(negatives, size=wanted, replace=False) if wanted < negatives.size else negatives
    keep = np.sort(np.concatenate([positives, chosen]))
    logger.debug("[data] task %r: %d positives, %d of %d negatives", str(positive_class),
                 positives.size, wanted, negatives.size)
    return MultiviewDataset(views=tuple(t[keep] for t in data.views), labels=np.where(mask[keep], 1, -1),
                            view_names=data.view_names)


def synth_multiview(m: int, V: int, d: int, redundancy: float, noise_views: int, seed: int,
                    class_sep: float = 1.0) -> MultiviewDataset:
    """
    Balanced +/-1 labels; V - noise_views informative views whose features are
    class_sep * y plus Gaussian noise shared across informative views with
    correlation `redundancy`; noise_views label-independent Gaussian views.
    Informative views come first.
    """
    if m < 1:
        raise UsageError(f"m must be >= 1, got {m}")
    if V < 2:
        raise UsageError(f"V must be >= 2, got {V}")
    if d < 1:
        raise UsageError(f"d must be >= 1, got {d}")
    if not 0.0 <= redundancy <= 1.0:
        raise UsageError(f"redundancy must be in [0, 1], got {redundancy}")
    if not 0 <= noise_views < V:
        raise UsageError(f"noise_views must be in [0, V), got {noise_views} with V={V}")

    rng = np.random.default_rng(seed)
    labels = np.where(rng.permutation(m) < (m + 1) // 2, 1, -1)
    shared = rng.standard_normal((m, d))
    informative = V - noise_views

    views, names = [], []
    for v in range(informative):
        own = rng.standard_normal((m, d))
        noise = math.sqrt(redundancy) * shared + math.sqrt(1.0 - redundancy) * own
        views.append(class_sep * labels[:, None] + noise)
        names.append(f"informative_{v + 1}")
    for v in range(noise_views):
        views.append(rng.standard_normal((m, d)))
        names.append(f"noise_{v + 1}")
    return MultiviewDataset(views=tuple(views), labels=labels, view_names=tuple(names))


# ============================================================
# Splits
# ============================================================

@dataclass(frozen=True)
class SplitSpec:
    m_train: int = 100
    test_fraction: float = 0.25
    repetitions: int = 20
    seed: int = 0
    negative_ratio: float = 1.0

    def __post_init__(self):
        if int(self.m_train) < 1:
            raise UsageError(f"m_train must be >= 1, got {self.m_train}")
        if not 0.0 < self.test_fraction < 1.0:
            raise UsageError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if int(self.repetitions) < 1:
            raise UsageError(f"repetitions must be >= 1, got {self.repetitions}")
        if not self.negative_ratio > 0:
            raise UsageError(f"negative_ratio must be > 0, got {self.negative_ratio}")


def stratified_split(indices: np.ndarray, labels: np.ndarray, seed: int, **sizes) -> tuple[np.ndarray, np.ndarray]:
    """Seeded split stratified by label; plain shuffle when the classes are too small to stratify."""
    try:
        first, second = train_test_split(indices, random_state=seed, stratify=labels, **sizes)
    except ValueError:
        first, second = train_test_split(indices, random_state=seed, **sizes)
    return np.sort(first), np.sort(second)


@dataclass(frozen=True, eq=False)
class Split:
    train: MultiviewDataset
    test: MultiviewDataset
    available: int = field(default=0)


def split_dataset(data: MulticlassDataset, positive_class: Any, spec: SplitSpec, rep: int,
                  m_train: Optional[int] = None) -> Split:
    """
    Repetition `rep` of the protocol: stratified test split, balanced
    one-vs-rest task on the remaining pool, then m_train labelled examples
    drawn from that task. Seeds are spec.seed + rep.
    """
    seed = rep_seed(spec.seed, rep)
    m_train = spec.m_train if m_train is None else int(m_train)
    pool_idx, test_idx = stratified_split(np.arange(data.m), data.classes, seed, test_size=spec.test_fraction)

    task = make_task(data.subset(pool_idx), positive_class, seed, spec.negative_ratio)
    if m_train > task.m:
        raise DataError(f"m_train={m_train} exceeds the {task.m} labelled examples available after balancing")
    if m_train < task.m:
        chosen, _ = stratified_split(np.arange(task.m), task.labels, seed, train_size=m_train)
        train = task.subset(chosen)
    else:
        train = task
    return Split(train=train, test=to_binary(data.subset(test_idx), positive_class), available=task.m)
