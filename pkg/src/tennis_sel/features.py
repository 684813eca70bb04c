"""Elo ratings, age transforms, difference-encoded designs and the 21 model specs."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .dataset import Dataset, MatchRecord, serialize_matches
from .errors import ConfigError, DataError, InvalidMatchError

DEFAULT_K = 32.0
DEFAULT_INITIAL = 1500.0
OPTIMAL_AGE = 30.0
OPTIMAL_AGE_RANGE = (28.0, 32.0)


class FeatureName(str, enum.Enum):
    Points = "Points"
    Rank = "Rank"
    Elo = "Elo"
    Age30 = "Age30"
    AgeInt = "AgeInt"

    @property
    def label(self) -> str:
        return {"Age30": "Age.30", "AgeInt": "Age.int"}.get(self.value, self.value)

    @classmethod
    def parse(cls, text: str) -> FeatureName:
        key = text.strip().replace(".", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ConfigError(f"unknown feature {text!r}; expected one of "
                          f"{', '.join(m.value for m in cls)}")


# Column order inside every design matrix.
FEATURE_ORDER = tuple(FeatureName)
AGE_FEATURES = frozenset({FeatureName.Age30, FeatureName.AgeInt})


class Learner(str, enum.Enum):
    Linear = "linear"
    Spline = "spline"
    Forest = "forest"


def canonical(features: Iterable[FeatureName]) -> tuple[FeatureName, ...]:
    chosen = set(features)
    return tuple(f for f in FEATURE_ORDER if f in chosen)


@dataclass(frozen=True)
class ModelSpec:
    """A covariate subset paired with a learner family."""

    features: tuple[FeatureName, ...]
    learner: Learner = Learner.Linear

    def __post_init__(self):
        feats = canonical(self.features)
        if len(feats) != len(self.features) or not feats:
            raise ConfigError(f"invalid feature set {self.features!r}")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "learner", Learner(self.learner))
        if AGE_FEATURES <= set(feats):
            raise ConfigError("a spec cannot contain both Age30 and AgeInt")
        if set(feats) <= AGE_FEATURES:
            raise ConfigError("an age feature needs at least one of Points, Rank, Elo")

    @property
    def key(self) -> str:
        return "+".join(f.value for f in self.features)

    @property
    def label(self) -> str:
        return ", ".join(f.label for f in self.features)

    @classmethod
    def parse(cls, text: str, learner=Learner.Linear) -> ModelSpec:
        parts = [p for p in text.replace("+", ",").replace(";", ",").split(",") if p.strip()]
        return cls(canonical(FeatureName.parse(p) for p in parts), learner)


# Row order of the published comparison tables.
_TABLE_ORDER = (
    "Points", "Elo", "Rank", "Points+Rank", "Points+Elo", "Rank+Elo",
    "Elo+Age30", "Rank+Age30", "Points+Age30", "Elo+AgeInt", "Rank+AgeInt",
    "Points+AgeInt", "Points+Rank+Elo", "Points+Rank+Age30", "Points+Rank+AgeInt",
    "Points+Elo+Age30", "Rank+Elo+Age30", "Points+Elo+AgeInt", "Rank+Elo+AgeInt",
    "Points+Rank+Elo+Age30", "Points+Rank+Elo+AgeInt",
)


def _valid_subsets():
    for size in range(1, len(FEATURE_ORDER) + 1):
        for combo in itertools.combinations(FEATURE_ORDER, size):
            s = set(combo)
            if AGE_FEATURES <= s or s <= AGE_FEATURES:
                continue
            yield combo


def enumerate_specs(learner=Learner.Linear) -> list[ModelSpec]:
    """All 21 admissible covariate subsets, in comparison-table row order.

    A subset is admissible when it is non-empty, holds at most one age
    transform, and never consists of an age transform alone.
    """
    rank = {key: i for i, key in enumerate(_TABLE_ORDER)}
    specs = [ModelSpec(combo, learner) for combo in _valid_subsets()]
    return sorted(specs, key=lambda s: rank[s.key])


# ---------------------------------------------------------------- Elo

def elo_expected(r_a: float, r_b: float) -> float:
    """Expected score of a player rated ``r_a`` against one rated ``r_b``."""
    return 1.0 / (1.0 + 10.0 ** ((r_b - r_a) / 400.0))


@dataclass
class EloTable:
    """Mutable ratings keyed by player id. Unknown players start at ``initial_rating``."""

    k_factor: float = DEFAULT_K
    initial_rating: float = DEFAULT_INITIAL
    ratings: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.k_factor > 0 and math.isfinite(self.k_factor)):
            raise ConfigError("k_factor must be positive and finite")
        if not math.isfinite(self.initial_rating):
            raise ConfigError("initial_rating must be finite")

    def rating(self, player_id: str) -> float:
        return self.ratings.get(player_id, self.initial_rating)

    def ensure(self, player_id: str) -> float:
        return self.ratings.setdefault(player_id, self.initial_rating)

    def update(self, winner_id: str, loser_id: str) -> float:
        """Apply one result and return the points moved from loser to winner."""
        if winner_id == loser_id:
            raise InvalidMatchError(f"player {winner_id!r} cannot play themself")
        rw, rl = self.ensure(winner_id), self.ensure(loser_id)
        delta = self.k_factor * (1.0 - elo_expected(rw, rl))
        self.ratings[winner_id] = rw + delta
        self.ratings[loser_id] = rl - delta
        return delta


def elo_update(table: EloTable, winner_id: str, loser_id: str) -> EloTable:
    table.update(winner_id, loser_id)
    return table


class AnnotatedMatch(NamedTuple):
    record: MatchRecord
    elo1: float
    elo2: float


def annotate_pre_match_elo(data: Dataset, init: float = DEFAULT_INITIAL,
                           k: float = DEFAULT_K) -> list[AnnotatedMatch]:
    """Attach each player's rating from strictly earlier matches, then update."""
    table = EloTable(k_factor=k, initial_rating=init)
    out = []
    for rec in data.records:
        e1, e2 = table.rating(rec.player1_id), table.rating(rec.player2_id)
        out.append(AnnotatedMatch(rec, e1, e2))
        if rec.victory:
            table.update(rec.player1_id, rec.player2_id)
        else:
            table.update(rec.player2_id, rec.player1_id)
    return out


def annotations_from_columns(data: Dataset) -> list[AnnotatedMatch]:
    """Use the ``elo1``/``elo2`` columns already present in the data."""
    if not data.has_elo:
        raise DataError("dataset has no pre-computed elo1/elo2 columns")
    return [AnnotatedMatch(r, float(r.elo1), float(r.elo2)) for r in data.records]


def serialize_annotated(annotated: Sequence[AnnotatedMatch]) -> str:
    """The match CSV schema with ``elo1,elo2`` appended."""
    records = tuple(replace(a.record, elo1=a.elo1, elo2=a.elo2) for a in annotated)
    return serialize_matches(Dataset(records), include_elo=True)


# ---------------------------------------------------------------- age

def _like_input(out):
    return float(out) if out.ndim == 0 else out


def age30(age):
    """Distance from the reference age 30."""
    return _like_input(np.abs(np.asarray(age, dtype=float) - OPTIMAL_AGE))


def age_int(age):
    """Distance to the interval [28, 32]; zero inside it."""
    lo, hi = OPTIMAL_AGE_RANGE
    a = np.asarray(age, dtype=float)
    return _like_input(np.maximum(np.maximum(lo - a, 0.0), a - hi))


# ---------------------------------------------------------------- design

@dataclass(frozen=True)
class FeatureRow:
    values: Mapping[FeatureName, float]
    label: int


@dataclass(frozen=True)
class Design:
    """Difference-encoded covariates for a list of matches.

    ``X[:, j]`` holds ``features[j]`` as player 1 minus player 2; ``groups``
    carries the tournament index of every row.
    """

    features: tuple[FeatureName, ...]
    X: np.ndarray
    y: np.ndarray
    groups: np.ndarray

    def __len__(self):
        return self.X.shape[0]

    def subset(self, mask_or_index) -> Design:
        return Design(self.features, self.X[mask_or_index], self.y[mask_or_index],
                      self.groups[mask_or_index])

    def select(self, features: Sequence[FeatureName]) -> Design:
        cols = [self.features.index(f) for f in features]
        return Design(tuple(features), self.X[:, cols], self.y, self.groups)

    def rows(self) -> list[FeatureRow]:
        return [FeatureRow(dict(zip(self.features, map(float, x))), int(y))
                for x, y in zip(self.X, self.y)]

    @classmethod
    def from_rows(cls, rows: Sequence[FeatureRow]) -> Design:
        if not rows:
            raise DataError("no rows")
        features = canonical(rows[0].values)
        X = np.array([[row.values[f] for f in features] for row in rows], dtype=float)
        y = np.array([row.label for row in rows], dtype=np.int64)
        return cls(features, X.reshape(len(rows), len(features)), y,
                   np.zeros(len(rows), dtype=np.int64))


def as_design(rows) -> Design:
    return rows if isinstance(rows, Design) else Design.from_rows(list(rows))


def _player_columns(annotated: Sequence[AnnotatedMatch], feature: FeatureName):
    recs = [a.record for a in annotated]
    if feature is FeatureName.Points:
        v1 = [r.points1 for r in recs]; v2 = [r.points2 for r in recs]
    elif feature is FeatureName.Rank:
        v1 = [r.rank1 for r in recs]; v2 = [r.rank2 for r in recs]
    elif feature is FeatureName.Elo:
        v1 = [a.elo1 for a in annotated]; v2 = [a.elo2 for a in annotated]
    else:
        transform = age30 if feature is FeatureName.Age30 else age_int
        return (transform(np.array([r.age1 for r in recs], dtype=float)),
                transform(np.array([r.age2 for r in recs], dtype=float)))
    return np.asarray(v1, dtype=float), np.asarray(v2, dtype=float)


def build_design(annotated: Sequence[AnnotatedMatch],
                 features: Sequence[FeatureName] = FEATURE_ORDER) -> Design:
    """Player 1 minus player 2 for each feature; label is ``victory``."""
    features = canonical(features)
    n = len(annotated)
    X = np.empty((n, len(features)))
    for j, f in enumerate(features):
        v1, v2 = _player_columns(annotated, f)
        X[:, j] = v1 - v2
    y = np.array([a.record.victory for a in annotated], dtype=np.int64)
    groups = np.array([a.record.tournament_index for a in annotated], dtype=np.int64)
    return Design(features, X, y, groups)


def build_rows(annotated: Sequence[AnnotatedMatch], spec: ModelSpec) -> list[FeatureRow]:
    return build_design(annotated, spec.features).rows()
