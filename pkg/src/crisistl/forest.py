"""Random Forest classifier (gini, exhaustive midpoint thresholds, bagging).

Labels are integers: 1 for Related (positive), 0 for NotRelated. Trees are
stored as flat node arrays; a row goes left when ``x[feature] <= threshold``.
"""

from __future__ import annotations

import gzip
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

FORMAT_NAME = "crisistl-forest"
FORMAT_VERSION = 1
_TIE_TOL = 1e-12


class ForestError(ValueError):
    pass


class ModelFormatError(ForestError):
    pass


class MaxFeatures(str, Enum):
    SQRT = "sqrt"
    ALL = "all"


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    criterion: str = "gini"
    max_depth: int | None = None
    min_samples_split: int = 2
    max_features: MaxFeatures | int = MaxFeatures.SQRT
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ForestError("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ForestError("min_samples_split must be >= 2")
        if self.criterion != "gini":
            raise ForestError(f"unsupported criterion {self.criterion!r}")
        if not isinstance(self.max_features, (MaxFeatures, int)):
            object.__setattr__(self, "max_features", MaxFeatures(self.max_features))

    def n_candidates(self, feature_count: int) -> int:
        if self.max_features == MaxFeatures.ALL:
            return feature_count
        if self.max_features == MaxFeatures.SQRT:
            return max(1, math.ceil(math.sqrt(feature_count)))
        return max(1, min(int(self.max_features), feature_count))

    def to_dict(self) -> dict:
        d = asdict(self)
        mf = self.max_features
        d["max_features"] = mf.value if isinstance(mf, MaxFeatures) else int(mf)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ForestParams":
        d = dict(d)
        mf = d.get("max_features", "sqrt")
        d["max_features"] = mf if isinstance(mf, int) else MaxFeatures(mf)
        return cls(**d)


def gini_impurity(class_counts: Sequence[int]) -> float:
    total = sum(class_counts)
    if total <= 0:
        raise ForestError("gini impurity of an empty node is undefined")
    return 1.0 - sum((c / total) ** 2 for c in class_counts)


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    impurity_decrease: float


def _midpoint(lo: float, hi: float) -> float:
    mid = (lo + hi) / 2.0
    # guard against rounding up onto the upper value
    return lo if mid >= hi else mid


def best_split(rows: np.ndarray, labels: np.ndarray, candidate_features: Sequence[int]) -> Split | None:
    """Exhaustive search over midpoints of consecutive distinct values.

    Maximizes the weighted gini decrease. Near-equal decreases (within 1e-12)
    go to the lower feature index, then the lower threshold.
    """
    rows = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    n = y.shape[0]
    feats = np.asarray(list(candidate_features), dtype=np.int64)
    if n < 2 or feats.size == 0:
        return None
    vals = rows[:, feats]
    order = np.argsort(vals, axis=0, kind="stable")
    svals = np.take_along_axis(vals, order, axis=0)
    sy = y[order]

    total_pos = int(y.sum())
    total_neg = n - total_pos
    if total_pos == 0 or total_neg == 0:
        return None
    left_pos = np.cumsum(sy, axis=0)[:-1].astype(np.float64)
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    left_neg = n_left - left_pos
    n_right = n - n_left
    right_pos = total_pos - left_pos
    right_neg = total_neg - left_pos * 0 - left_neg
    score = (left_pos**2 + left_neg**2) / n_left + (right_pos**2 + right_neg**2) / n_right
    decrease = score / n - (total_pos**2 + total_neg**2) / (n * n)
    valid = svals[:-1] < svals[1:]
    decrease = np.where(valid, decrease, -np.inf)

    best = decrease.max()
    if not np.isfinite(best) or best <= _TIE_TOL:
        return None
    near = decrease >= best - _TIE_TOL
    cols = np.flatnonzero(near.any(axis=0))
    col = cols[np.argmin(feats[cols])]
    pos = int(np.flatnonzero(near[:, col])[0])
    threshold = _midpoint(float(svals[pos, col]), float(svals[pos + 1, col]))
    return Split(int(feats[col]), threshold, float(decrease[pos, col]))


@dataclass
class Tree:
    feature: np.ndarray     # int64, -1 marks a leaf
    threshold: np.ndarray   # float64
    left: np.ndarray        # int64 child index, -1 for leaves
    right: np.ndarray
    counts: np.ndarray      # (n_nodes, 2) int64: NotRelated, Related

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def vote(self, X: np.ndarray) -> np.ndarray:
        """Majority class of the reached leaf; a tied leaf votes NotRelated."""
        c = self.counts[self.apply(X)]
        return (c[:, 1] > c[:, 0]).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        t = cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["counts"], dtype=np.int64).reshape(-1, 2),
        )
        n = t.n_nodes
        if not (len(t.threshold) == len(t.left) == len(t.right) == len(t.counts) == n) or n == 0:
            raise ModelFormatError("tree arrays have inconsistent lengths")
        return t


def build_tree(
    X: np.ndarray,
    y: np.ndarray,
    sample_idx: np.ndarray,
    params: ForestParams,
    rng: np.random.Generator,
) -> Tree:
    n_features = X.shape[1]
    k = params.n_candidates(n_features)
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx: np.ndarray) -> int:
        pos = int(y[idx].sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append((idx.size - pos, pos))
        return len(feature) - 1

    root = new_node(sample_idx)
    stack = [(root, sample_idx, 0)]
    while stack:
        node, idx, depth = stack.pop()
        n_neg, n_pos = counts[node]
        if (
            idx.size < params.min_samples_split
            or n_neg == 0
            or n_pos == 0
            or (params.max_depth is not None and depth >= params.max_depth)
        ):
            continue
        if k >= n_features:
            cand = np.arange(n_features)
        else:
            cand = np.sort(rng.choice(n_features, size=k, replace=False))
        split = best_split(X[idx], y[idx], cand)
        if split is None:
            continue
        go_left = X[idx, split.feature] <= split.threshold
        li, ri = idx[go_left], idx[~go_left]
        feature[node] = split.feature
        threshold[node] = split.threshold
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(counts, dtype=np.int64).reshape(-1, 2),
    )


@dataclass
class RandomForestModel:
    trees: list[Tree]
    params: ForestParams
    feature_count: int
    representation: str | None = None
    schema_version: str = ""

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, self.feature_count)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise ForestError(f"expected {self.feature_count} features, got shape {X.shape}")
        return X

    def votes(self, X) -> np.ndarray:
        X = self._check(X)
        out = np.zeros(X.shape[0], dtype=np.int64)
        for t in self.trees:
            out += t.vote(X)
        return out

    def predict_proba(self, X) -> np.ndarray:
        """Fraction of trees voting Related."""
        return self.votes(X) / len(self.trees)

    def predict(self, X) -> np.ndarray:
        """Majority vote; a tie goes to NotRelated."""
        v = self.votes(X)
        return (2 * v > len(self.trees)).astype(np.int64)


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tree_index)]))


def fit_forest(
    X,
    y,
    params: ForestParams = ForestParams(),
    representation: str | None = None,
    schema_version: str = "",
    workers: int = 1,
) -> RandomForestModel:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ForestError(f"X has shape {X.shape} but y has {y.shape[0]} labels")
    if X.shape[0] < 2:
        raise ForestError("need at least two training rows")
    if not np.isfinite(X).all():
        raise ForestError("feature matrix contains non-finite values")
    if set(np.unique(y).tolist()) != {0, 1}:
        raise ForestError("training labels must contain both classes (0 and 1)")
    n = X.shape[0]

    def grow(t: int) -> Tree:
        rng = tree_rng(params.seed, t)
        idx = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        return build_tree(X, y, idx, params, rng)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(grow, range(params.n_trees)))
    else:
        trees = [grow(t) for t in range(params.n_trees)]
    return RandomForestModel(trees, params, X.shape[1], representation, schema_version)


def save_model(model: RandomForestModel, path: str | Path) -> None:
    payload = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "params": model.params.to_dict(),
        "feature_count": model.feature_count,
        "representation": model.representation,
        "schema_version": model.schema_version,
        "trees": [t.to_dict() for t in model.trees],
    }
    data = json.dumps(payload, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    if path.suffix == ".gz":
        data = gzip.compress(data, mtime=0)
    path.write_bytes(data)


def load_model(path: str | Path, expected_schema_version: str | None = None) -> RandomForestModel:
    path = Path(path)
    raw = path.read_bytes()
    try:
        if path.suffix == ".gz":
            raw = gzip.decompress(raw)
        payload = json.loads(raw.decode("utf-8"))
    except (OSError, EOFError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: corrupt model file ({exc})") from None
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_NAME:
        raise ModelFormatError(f"{path}: not a {FORMAT_NAME} file")
    if payload.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {payload.get('format_version')!r}")
    schema = payload.get("schema_version", "")
    if expected_schema_version is not None and schema != expected_schema_version:
        raise ModelFormatError(f"{path}: schema version {schema!r} != expected {expected_schema_version!r}")
    try:
        params = ForestParams.from_dict(payload["params"])
        trees = [Tree.from_dict(t) for t in payload["trees"]]
        fc = int(payload["feature_count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model ({exc})") from None
    if len(trees) != params.n_trees:
        raise ModelFormatError(f"{path}: {len(trees)} trees stored, params say {params.n_trees}")
    for t in trees:
        if (t.feature >= fc).any():
            raise ModelFormatError(f"{path}: tree references a feature index >= {fc}")
    return RandomForestModel(trees, params, fc, payload.get("representation"), schema)
