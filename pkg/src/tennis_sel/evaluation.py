"""Scoring rules, chronological validation schemes and comparison reports.

Every scheme yields a list of :class:`Split` objects (training tournaments
plus one test tournament). :func:`run_validation` fits each spec/learner
pair on every split and pools the test predictions before scoring.
"""

from __future__ import annotations

import csv
import enum
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._seeding import derive_seed
from .dataset import Dataset
from .errors import ConfigError, DataError, InsufficientDataError
from .features import (
    DEFAULT_INITIAL,
    DEFAULT_K,
    FEATURE_ORDER,
    AnnotatedMatch,
    Design,
    Learner,
    ModelSpec,
    annotate_pre_match_elo,
    build_design,
)
from .forest import CV_FOLDS, MIN_NODE, NTREE, fit_forest, tune_mtry
from .glm_linear import fit_logistic
from .glm_spline import DEFAULT_LAMBDA_GRID, fit_pspline_gam

DEFAULT_WINDOW = 12
# best-marker ties are judged on the precision shown in the tables
TIE_DECIMALS = 3
REPORT_COLUMNS = ("scheme", "learner", "features", "n", "class_rate", "likelihood", "brier")
MEASURES = ("class_rate", "likelihood", "brier")
_HIGHER_IS_BETTER = {"class_rate": True, "likelihood": True, "brier": False}


class Scheme(str, enum.Enum):
    Expanding = "expanding"
    Rolling = "rolling"
    LeaveOneTournamentOut = "cv"

    @classmethod
    def parse(cls, text) -> Scheme:
        if isinstance(text, cls):
            return text
        aliases = {"loto": "cv", "expanding_window": "expanding", "rolling_window": "rolling"}
        try:
            return cls(aliases.get(str(text), str(text)))
        except ValueError:
            raise ConfigError(f"unknown scheme {text!r}; expected expanding, rolling or cv") from None


# ---------------------------------------------------------------- metrics

@dataclass(frozen=True)
class Prediction:
    match_ref: int
    prob: float
    truth: int

    def __post_init__(self):
        if not 0.0 <= self.prob <= 1.0:
            raise ValueError(f"probability {self.prob} outside [0, 1]")


@dataclass(frozen=True)
class Scores:
    classification_rate: float
    predictive_likelihood: float
    brier: float
    n: int

    def measure(self, name: str) -> float:
        return {"class_rate": self.classification_rate,
                "likelihood": self.predictive_likelihood,
                "brier": self.brier}[name]


def _unpack(prob, truth):
    if truth is None:
        preds = list(prob)
        prob = [p.prob for p in preds]
        truth = [p.truth for p in preds]
    prob = np.asarray(prob, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if prob.size == 0:
        raise DataError("cannot score an empty prediction set")
    if prob.shape != truth.shape:
        raise DataError("prob and truth differ in length")
    return prob, truth


def classification_rate(prob, truth=None) -> float:
    """Share of matches where ``prob > 0.5`` agrees with the outcome.

    Accepts either a sequence of :class:`Prediction` or parallel arrays.
    A probability of exactly 0.5 predicts a loss for player 1.
    """
    p, y = _unpack(prob, truth)
    return float(np.mean((p > 0.5) == (y == 1)))


def predictive_likelihood(prob, truth=None) -> float:
    """Mean probability assigned to the realised outcome."""
    p, y = _unpack(prob, truth)
    return float(np.mean(np.where(y == 1, p, 1.0 - p)))


def brier_score(prob, truth=None) -> float:
    p, y = _unpack(prob, truth)
    return float(np.mean((p - y) ** 2))


def score(prob, truth=None) -> Scores:
    p, y = _unpack(prob, truth)
    return Scores(classification_rate(p, y), predictive_likelihood(p, y), brier_score(p, y), int(p.size))


# ---------------------------------------------------------------- schemes

@dataclass(frozen=True)
class Split:
    """One train/test iteration; tournaments are referred to by index."""

    index: int
    train: tuple[int, ...]
    test: int


def expanding_splits(data: Dataset, final_year: int | None = None) -> list[Split]:
    """Each tournament of ``final_year`` is predicted from everything before it.

    ``final_year`` defaults to the last year in ``data``.
    """
    if data.n_tournaments == 0:
        raise InsufficientDataError("dataset has no tournaments")
    year = data.years[-1] if final_year is None else int(final_year)
    tests = data.tournament_indices(year)
    if not tests:
        raise InsufficientDataError(f"no tournaments in final year {year}")
    if tests[0] == 0:
        raise InsufficientDataError(
            f"first tournament of final year {year} has no earlier tournaments to train on")
    return [Split(i, tuple(range(k)), k) for i, k in enumerate(tests)]


def rolling_splits(data: Dataset, window: int = DEFAULT_WINDOW) -> list[Split]:
    """Tournament ``k`` is predicted from the ``window`` tournaments just before it."""
    if window < 1:
        raise ConfigError("window must be >= 1")
    T = data.n_tournaments
    if T <= window:
        raise InsufficientDataError(f"rolling window of {window} needs more than {window} "
                                    f"tournaments, dataset has {T}")
    return [Split(i, tuple(range(k - window, k)), k) for i, k in enumerate(range(window, T))]


def loto_splits(data: Dataset) -> list[Split]:
    """Each tournament in turn is the test set; all others train."""
    T = data.n_tournaments
    if T < 2:
        raise InsufficientDataError(f"leave-one-tournament-out needs >= 2 tournaments, got {T}")
    return [Split(k, tuple(j for j in range(T) if j != k), k) for k in range(T)]


def make_splits(data: Dataset, scheme, *, window: int = DEFAULT_WINDOW,
                final_year: int | None = None) -> list[Split]:
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.Expanding:
        return expanding_splits(data, final_year)
    if scheme is Scheme.Rolling:
        return rolling_splits(data, window)
    return loto_splits(data)


# ---------------------------------------------------------------- fitting

@dataclass(frozen=True)
class FitOptions:
    """Learner settings shared by every cell of a validation run."""

    seed: int = 0
    ntree: int = NTREE
    mtry: int | None = None        # None re-tunes per training window
    min_node: int = MIN_NODE
    cv_folds: int = CV_FOLDS
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID


def fit_model(design: Design, learner, *, options: FitOptions = FitOptions(),
              stream: Sequence = ()):
    """Fit ``learner`` on ``design``; ``stream`` keys the forest's seeds."""
    learner = Learner(learner)
    if learner is Learner.Linear:
        return fit_logistic(design)
    if learner is Learner.Spline:
        return fit_pspline_gam(design, options.lambda_grid)
    p = design.X.shape[1]
    mtry = options.mtry
    if mtry is None:
        mtry = tune_mtry(design, range(1, p + 1), options.cv_folds, ntree=options.ntree,
                         seed=derive_seed(options.seed, "mtry", *stream),
                         min_node=options.min_node)
    elif mtry > p:
        # a fixed mtry larger than a small spec uses every feature
        mtry = p
    return fit_forest(design, mtry, options.ntree, derive_seed(options.seed, "forest", *stream),
                      min_node=options.min_node)


@dataclass(frozen=True)
class Cell:
    """Pooled test results of one (learner, spec) pair."""

    learner: Learner
    spec: ModelSpec
    scores: Scores
    prob: np.ndarray = field(repr=False, compare=False)
    truth: np.ndarray = field(repr=False, compare=False)
    converged: tuple[bool, ...] = ()
    mtry: tuple[int, ...] = ()


def _run_cell(design: Design, splits, scheme: Scheme, learner: Learner, spec: ModelSpec,
              options: FitOptions) -> Cell:
    sub = design.select(spec.features)
    probs, truths, converged, mtrys = [], [], [], []
    for split in splits:
        train = np.isin(sub.groups, split.train)
        test = sub.groups == split.test
        model = fit_model(sub.subset(train), learner, options=options,
                          stream=(scheme.value, spec.key, split.index))
        probs.append(model.predict_proba(sub.X[test]))
        truths.append(sub.y[test])
        converged.append(bool(getattr(model, "converged", True)))
        if learner is Learner.Forest:
            mtrys.append(model.mtry)
    prob = np.concatenate(probs)
    truth = np.concatenate(truths)
    return Cell(learner, spec, score(prob, truth), prob, truth, tuple(converged), tuple(mtrys))


def _run_cell_args(args):
    return _run_cell(*args)


# ---------------------------------------------------------------- report

@dataclass(frozen=True)
class EvaluationReport:
    """Scores for every (learner, spec) cell of one validation scheme."""

    scheme: Scheme
    cells: dict[tuple[Learner, str], Cell]
    specs: tuple[ModelSpec, ...]
    learners: tuple[Learner, ...]
    splits: tuple[Split, ...] = ()

    def __len__(self):
        return len(self.cells)

    def cell(self, learner, spec) -> Cell:
        key = spec.key if isinstance(spec, ModelSpec) else ModelSpec.parse(spec).key
        return self.cells[(Learner(learner), key)]

    def scores(self, learner, spec) -> Scores:
        return self.cell(learner, spec).scores

    def ordered_cells(self) -> list[Cell]:
        return [self.cells[(lr, s.key)] for lr in self.learners for s in self.specs
                if (lr, s.key) in self.cells]

    @property
    def best_markers(self) -> dict[tuple[Learner, str], frozenset[str]]:
        """Per learner and measure, the covariate-set keys attaining the best rounded value."""
        out = {}
        for lr in self.learners:
            cells = [c for c in self.ordered_cells() if c.learner is lr]
            for m in MEASURES:
                values = {c.spec.key: round(c.scores.measure(m), TIE_DECIMALS) for c in cells}
                if not values:
                    continue
                target = (max if _HIGHER_IS_BETTER[m] else min)(values.values())
                out[(lr, m)] = frozenset(k for k, v in values.items() if v == target)
        return out

    def is_best(self, cell: Cell, measure: str) -> bool:
        return cell.spec.key in self.best_markers.get((cell.learner, measure), ())


def run_validation(data: Dataset, scheme, specs: Iterable[ModelSpec] | None = None,
                   learners: Iterable = (Learner.Linear,), *,
                   window: int = DEFAULT_WINDOW, final_year: int | None = None,
                   options: FitOptions = FitOptions(),
                   annotated: Sequence[AnnotatedMatch] | None = None,
                   elo_k: float = DEFAULT_K, elo_init: float = DEFAULT_INITIAL,
                   jobs: int = 1) -> EvaluationReport:
    """Evaluate ``specs`` x ``learners`` under ``scheme``.

    Elo is attached once over the whole chronology (pre-match values only)
    unless ``annotated`` is supplied. Cells are independent, and ``jobs > 1``
    spreads them over processes without changing any result.
    """
    from .features import enumerate_specs

    scheme = Scheme.parse(scheme)
    learners = tuple(dict.fromkeys(Learner(lr) for lr in learners))
    specs = tuple(enumerate_specs()) if specs is None else tuple(specs)
    if not specs or not learners:
        raise ConfigError("need at least one spec and one learner")
    splits = make_splits(data, scheme, window=window, final_year=final_year)
    if annotated is None:
        annotated = annotate_pre_match_elo(data, elo_init, elo_k)
    design = build_design(annotated, FEATURE_ORDER)

    tasks = [(design, splits, scheme, lr, s, options) for lr in learners for s in specs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell_args, tasks))
    else:
        results = [_run_cell(*t) for t in tasks]
    cells = {(c.learner, c.spec.key): c for c in results}
    return EvaluationReport(scheme, cells, specs, learners, tuple(splits))


def expanding_window(data, specs=None, learners=(Learner.Linear,), final_year=None, **kw):
    return run_validation(data, Scheme.Expanding, specs, learners, final_year=final_year, **kw)


def rolling_window(data, specs=None, learners=(Learner.Linear,), window=DEFAULT_WINDOW, **kw):
    return run_validation(data, Scheme.Rolling, specs, learners, window=window, **kw)


def loto_cv(data, specs=None, learners=(Learner.Linear,), **kw):
    return run_validation(data, Scheme.LeaveOneTournamentOut, specs, learners, **kw)


# ---------------------------------------------------------------- rendering

def render_report(report: EvaluationReport, fmt: str = "csv") -> str:
    """CSV (exact values, plus a ``best`` column) or Markdown with bold winners."""
    cells = report.ordered_cells()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS + ("best",))
        for c in cells:
            s = c.scores
            best = ";".join(m for m in MEASURES if report.is_best(c, m))
            w.writerow([report.scheme.value, c.learner.value, c.spec.key, s.n,
                        repr(s.classification_rate), repr(s.predictive_likelihood),
                        repr(s.brier), best])
        return buf.getvalue()
    if fmt == "md":
        lines = []
        for lr in report.learners:
            rows = [c for c in cells if c.learner is lr]
            if not rows:
                continue
            if lines:
                lines.append("")
            lines += [f"**{report.scheme.value}: {lr.value}**", "",
                      "| Covariates | Class. rate | Likelihood | Brier |",
                      "|---|---:|---:|---:|"]
            for c in rows:
                vals = []
                for m in MEASURES:
                    txt = f"{c.scores.measure(m):.3f}"
                    vals.append(f"**{txt}**" if report.is_best(c, m) else txt)
                lines.append(f"| {c.spec.label} | " + " | ".join(vals) + " |")
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown format {fmt!r}; expected csv or md")


def parse_report(text: str) -> EvaluationReport:
    """Read a CSV written by :func:`render_report`; predictions are not kept."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not set(REPORT_COLUMNS) <= set(reader.fieldnames):
        raise DataError(f"report header must contain {','.join(REPORT_COLUMNS)}")
    cells = {}
    schemes, specs, learners = set(), {}, {}
    empty = np.zeros(0)
    for row in reader:
        schemes.add(Scheme.parse(row["scheme"]))
        lr = Learner(row["learner"])
        spec = ModelSpec.parse(row["features"], lr)
        scores = Scores(float(row["class_rate"]), float(row["likelihood"]),
                        float(row["brier"]), int(row["n"]))
        cells[(lr, spec.key)] = Cell(lr, spec, scores, empty, empty)
        specs.setdefault(spec.key, ModelSpec(spec.features))
        learners.setdefault(lr, None)
    if len(schemes) != 1:
        raise DataError("a report holds exactly one scheme")
    return EvaluationReport(schemes.pop(), cells, tuple(specs.values()), tuple(learners))
