"""Random forest of Gini classification trees with CV-tuned ``mtry``."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from . import _tree_kernels as K
from ._seeding import derive_seed
from .errors import ConfigError, InsufficientDataError
from .features import Design, FeatureName, FeatureRow, as_design

NTREE = 400
MIN_NODE = 5
CV_FOLDS = 10


@dataclass(frozen=True)
class Leaf:
    n0: int
    n1: int


@dataclass(frozen=True)
class Split:
    feature: FeatureName
    threshold: float
    left: "TreeNode"
    right: "TreeNode"
    gain: float = 0.0


TreeNode = Union[Split, Leaf]


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat node arrays of one tree; node 0 is the root."""

    features: tuple[FeatureName, ...]
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n0: np.ndarray
    n1: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def node(self, i: int = 0) -> TreeNode:
        if self.feature[i] < 0:
            return Leaf(int(self.n0[i]), int(self.n1[i]))
        return Split(self.features[self.feature[i]], float(self.threshold[i]),
                     self.node(int(self.left[i])), self.node(int(self.right[i])),
                     float(self.gain[i]))

    @property
    def root(self) -> TreeNode:
        return self.node(0)

    def predict_proba(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float).reshape(-1, len(self.features))
        offsets = np.array([0, self.n_nodes], dtype=np.int64)
        return K.leaf_proportions(X, self.feature, self.threshold, self.left, self.right,
                                  self.n0, self.n1, offsets)[:, 0]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "n0": self.n0.tolist(),
            "n1": self.n1.tolist(),
        }


@dataclass(frozen=True, eq=False)
class ForestModel:
    """``ntree`` trees stored back to back; ``offsets[t]`` is tree ``t``'s first node."""

    features: tuple[FeatureName, ...]
    mtry: int
    ntree: int
    seed: int
    min_node: int
    feature: np.ndarray = field(repr=False)
    threshold: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)
    n0: np.ndarray = field(repr=False)
    n1: np.ndarray = field(repr=False)
    gain: np.ndarray = field(repr=False)
    offsets: np.ndarray = field(repr=False)

    @property
    def trees(self) -> list[Tree]:
        return [self.tree(t) for t in range(self.ntree)]

    def tree(self, t: int) -> Tree:
        a, b = self.offsets[t], self.offsets[t + 1]
        return Tree(self.features, self.feature[a:b], self.threshold[a:b], self.left[a:b],
                    self.right[a:b], self.n0[a:b], self.n1[a:b], self.gain[a:b])

    def leaf_proportions(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float).reshape(-1, len(self.features))
        return K.leaf_proportions(X, self.feature, self.threshold, self.left, self.right,
                                  self.n0, self.n1, self.offsets)

    def predict_proba(self, X) -> np.ndarray:
        """Mean over trees of the class-1 share in the reached leaf."""
        X = np.ascontiguousarray(X, dtype=float).reshape(-1, len(self.features))
        return K.mean_leaf_proportion(X, self.feature, self.threshold, self.left, self.right,
                                      self.n0, self.n1, self.offsets)

    def predict_row(self, row: Mapping[FeatureName, float]) -> float:
        values = row.values if isinstance(row, FeatureRow) else row
        x = np.array([[values[f] for f in self.features]], dtype=float)
        return float(self.predict_proba(x)[0])

    def to_dict(self) -> dict:
        return {
            "learner": "forest",
            "features": [f.value for f in self.features],
            "mtry": self.mtry,
            "ntree": self.ntree,
            "seed": self.seed,
            "min_node": self.min_node,
            "trees": [self.tree(t).to_dict() for t in range(self.ntree)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> ForestModel:
        trees = d["trees"]
        sizes = [len(t["feature"]) for t in trees]
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)

        def cat(key, dtype):
            return np.concatenate([np.asarray(t[key], dtype=dtype) for t in trees])

        return cls(
            features=tuple(FeatureName(f) for f in d["features"]),
            mtry=int(d["mtry"]), ntree=int(d["ntree"]), seed=int(d["seed"]),
            min_node=int(d["min_node"]),
            feature=cat("feature", np.int64), threshold=cat("threshold", float),
            left=cat("left", np.int64), right=cat("right", np.int64),
            n0=cat("n0", np.int64), n1=cat("n1", np.int64),
            gain=np.zeros(int(offsets[-1])), offsets=offsets,
        )


def _tree_seed(seed, index):
    return derive_seed(seed, "tree", index)


def _check_mtry(mtry, p):
    if not 1 <= int(mtry) <= p:
        raise ConfigError(f"mtry must be in [1, {p}], got {mtry}")
    return int(mtry)


def _arrays(design: Design):
    X = np.ascontiguousarray(design.X, dtype=float)
    y = np.ascontiguousarray(design.y, dtype=np.int64)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    return X, y, order


def fit_tree(rows, mtry: int, rng=0, min_node: int = MIN_NODE) -> Tree:
    """Grow one tree on ``rows`` as given (no resampling).

    ``rng`` is an integer seed or a ``numpy.random.Generator``; it only
    drives the per-node feature draws.
    """
    design = as_design(rows)
    if len(design) == 0:
        raise InsufficientDataError("cannot grow a tree on zero rows")
    mtry = _check_mtry(mtry, design.X.shape[1])
    if isinstance(rng, np.random.Generator):
        rng = int(rng.integers(0, 2**63))
    X, y, order = _arrays(design)
    state = np.array([np.uint64(derive_seed(rng, "tree-rng"))], dtype=np.uint64)
    w = np.ones(len(y), dtype=np.int64)
    out = K.grow_tree(X, y, w, order, mtry, int(min_node), state)
    return Tree(design.features, *out)


def fit_forest(rows, mtry: int, ntree: int = NTREE, seed: int = 0, *,
               min_node: int = MIN_NODE, n_jobs: int = 1) -> ForestModel:
    """Bagged trees on bootstrap resamples; tree ``t`` uses a stream derived from ``(seed, t)``.

    The result does not depend on ``n_jobs``.
    """
    design = as_design(rows)
    if len(design) < 2:
        raise InsufficientDataError("need at least 2 rows to fit a forest")
    if ntree < 1:
        raise ConfigError("ntree must be >= 1")
    mtry = _check_mtry(mtry, design.X.shape[1])
    X, y, order = _arrays(design)
    seeds = np.array([_tree_seed(seed, t) for t in range(ntree)], dtype=np.uint64)

    if n_jobs <= 1 or ntree < 2:
        parts = [K.grow_forest(X, y, order, seeds, mtry, int(min_node), True)]
    else:
        chunks = np.array_split(seeds, min(n_jobs, ntree))
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(
                lambda s: K.grow_forest(X, y, order, s, mtry, int(min_node), True), chunks))

    fields = [np.concatenate([part[i] for part in parts]) for i in range(7)]
    sizes = np.concatenate([np.diff(part[7]) for part in parts])
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    return ForestModel(design.features, mtry, int(ntree), int(seed), int(min_node),
                       *fields, offsets)


def predict_prob(model: ForestModel, row: Mapping[FeatureName, float]) -> float:
    return model.predict_row(row)


def stratified_folds(y, k: int, seed: int = 0) -> np.ndarray:
    """Fold id per row; each class is shuffled and dealt round-robin."""
    y = np.asarray(y)
    rng = np.random.default_rng(derive_seed(seed, "folds"))
    folds = np.empty(len(y), dtype=np.int64)
    offset = 0
    for label in np.unique(y):
        members = np.flatnonzero(y == label)
        rng.shuffle(members)
        folds[members] = (np.arange(len(members)) + offset) % k
        offset += len(members)
    return folds


def tune_mtry(rows, candidates: Sequence[int] | None = None, k: int = CV_FOLDS, *,
              ntree: int = NTREE, seed: int = 0, min_node: int = MIN_NODE,
              n_jobs: int = 1) -> int:
    """Candidate with the best mean ``k``-fold classification rate; ties go to the smaller.

    Every candidate is scored on the same stratified folds and the same
    per-fold forest seed.
    """
    design = as_design(rows)
    p = design.X.shape[1]
    cands = sorted({int(c) for c in (candidates if candidates is not None else range(1, p + 1))})
    if not cands:
        raise ConfigError("no mtry candidates")
    for c in cands:
        _check_mtry(c, p)
    if k < 2:
        raise ConfigError("k must be >= 2")
    if len(design) < k:
        raise ConfigError(f"{len(design)} rows cannot be split into {k} folds")
    if len(cands) == 1:
        return cands[0]

    folds = stratified_folds(design.y, k, seed)
    scores = {}
    for c in cands:
        rates = []
        for fold in range(k):
            test = folds == fold
            model = fit_forest(design.subset(~test), c, ntree, derive_seed(seed, "cv", fold),
                               min_node=min_node, n_jobs=n_jobs)
            prob = model.predict_proba(design.X[test])
            rates.append(np.mean((prob > 0.5) == (design.y[test] == 1)))
        scores[c] = float(np.mean(rates))
    best = max(scores.values())
    return min(c for c, s in scores.items() if s == best)
