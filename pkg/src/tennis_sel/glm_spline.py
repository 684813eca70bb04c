"""Additive logistic model with one P-spline smooth per covariate.

Each smooth is a cubic B-spline expansion on equidistant knots with a
second-order difference penalty on adjacent coefficients. The model is
fitted by penalized IRLS and each smoothing weight is picked from a grid
by GCV, one coordinate pass over the smooths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DataError, InsufficientDataError, SingularDesignError
from .features import Design, FeatureName, FeatureRow, as_design
from .glm_linear import MAX_HALVINGS, MAX_ITER, TOL, binomial_deviance

DEFAULT_LAMBDA_GRID = tuple(np.logspace(-4, 6, 21))
N_BASIS = 10
DEGREE = 3
PENALTY_ORDER = 2


@dataclass(frozen=True)
class SplineBasis:
    """B-spline basis of ``degree`` on the full knot vector ``knots``.

    The evaluation domain is ``[knots[degree], knots[-degree - 1]]``;
    inputs outside it are clamped to the nearest boundary.
    """

    degree: int
    knots: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        if knots.ndim != 1 or np.any(np.diff(knots) < 0):
            raise ConfigError("knots must be a non-decreasing vector")
        if len(knots) < 2 * self.degree + 2:
            raise ConfigError("too few knots for the requested degree")
        if not knots[self.degree] < knots[-self.degree - 1]:
            raise ConfigError("empty basis domain")
        object.__setattr__(self, "knots", knots)

    @property
    def n_basis(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[self.degree]), float(self.knots[-self.degree - 1])

    @classmethod
    def equidistant(cls, lo: float, hi: float, n_basis: int = N_BASIS,
                    degree: int = DEGREE) -> SplineBasis:
        """``n_basis`` functions on [lo, hi] with knots extended past both ends."""
        n_interior = n_basis - degree - 1
        if n_interior < 0:
            raise ConfigError("n_basis must be at least degree + 1")
        h = (hi - lo) / (n_interior + 1)
        knots = lo + h * np.arange(-degree, n_interior + degree + 2)
        knots[degree], knots[-degree - 1] = lo, hi
        return cls(degree, knots)

    @classmethod
    def clamped(cls, interior: Sequence[float], lo: float, hi: float,
                degree: int = DEGREE) -> SplineBasis:
        """Boundary knots repeated ``degree + 1`` times."""
        knots = np.concatenate([[lo] * (degree + 1), np.sort(interior), [hi] * (degree + 1)])
        return cls(degree, knots)

    def evaluate(self, x) -> np.ndarray:
        """Basis matrix of shape ``(len(x), n_basis)`` by the Cox-de Boor recursion."""
        t, k = self.knots, self.degree
        lo, hi = self.domain
        x = np.clip(np.atleast_1d(np.asarray(x, dtype=float)), lo, hi)

        m = len(t)
        B = ((t[:-1] <= x[:, None]) & (x[:, None] < t[1:])).astype(float)
        # the right boundary belongs to the last non-empty span inside the domain
        last = max(i for i in range(m - k - 1) if t[i] < t[i + 1])
        at_hi = x >= hi
        B[at_hi] = 0.0
        B[at_hi, last] = 1.0

        for r in range(1, k + 1):
            n_out = m - 1 - r
            left_den = t[r:r + n_out] - t[:n_out]
            right_den = t[r + 1:r + 1 + n_out] - t[1:1 + n_out]
            with np.errstate(divide="ignore", invalid="ignore"):
                wl = np.where(left_den > 0, (x[:, None] - t[:n_out]) / left_den, 0.0)
                wr = np.where(right_den > 0, (t[r + 1:r + 1 + n_out] - x[:, None]) / right_den, 0.0)
            B = wl * B[:, :n_out] + wr * B[:, 1:n_out + 1]
        return B


def bspline_basis_eval(basis: SplineBasis, x):
    """Basis vector at scalar ``x``; a matrix for array input."""
    B = basis.evaluate(x)
    return B[0] if np.ndim(x) == 0 else B


def difference_matrix(d: int, order: int) -> np.ndarray:
    if not 1 <= order < d:
        raise ConfigError(f"need d > order >= 1, got d={d}, order={order}")
    return np.diff(np.eye(d), n=order, axis=0)


def difference_penalty(d: int, order: int = PENALTY_ORDER) -> np.ndarray:
    """``D'D`` for the ``order``-th difference operator on ``d`` coefficients."""
    D = difference_matrix(d, order)
    return D.T @ D


@dataclass(frozen=True)
class Smooth:
    feature: FeatureName
    basis: SplineBasis
    gamma: np.ndarray
    lam: float

    def __call__(self, x) -> np.ndarray:
        return self.basis.evaluate(x) @ self.gamma


@dataclass(frozen=True)
class SplineModel:
    """Intercept plus one centered smooth per feature, on the logit scale."""

    features: tuple[FeatureName, ...]
    intercept: float
    smooths: dict[FeatureName, Smooth]
    converged: bool
    gcv: float = float("nan")
    edf: float = float("nan")
    fitted: np.ndarray | None = field(default=None, repr=False, compare=False)
    penalized_trace: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def linear_predictor(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, len(self.features))
        eta = np.full(X.shape[0], self.intercept)
        for j, f in enumerate(self.features):
            eta = eta + self.smooths[f](X[:, j])
        return eta

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.linear_predictor(X))

    def predict_row(self, row: Mapping[FeatureName, float]) -> float:
        values = row.values if isinstance(row, FeatureRow) else row
        x = np.array([[values[f] for f in self.features]], dtype=float)
        return float(self.predict_proba(x)[0])

    def to_dict(self) -> dict:
        return {
            "learner": "spline",
            "features": [f.value for f in self.features],
            "intercept": self.intercept,
            "converged": self.converged,
            "smooths": {
                f.value: {
                    "degree": s.basis.degree,
                    "knots": s.basis.knots.tolist(),
                    "gamma": s.gamma.tolist(),
                    "lambda": s.lam,
                }
                for f, s in self.smooths.items()
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> SplineModel:
        features = tuple(FeatureName(f) for f in d["features"])
        smooths = {}
        for f in features:
            s = d["smooths"][f.value]
            smooths[f] = Smooth(f, SplineBasis(int(s["degree"]), np.array(s["knots"])),
                                np.array(s["gamma"], dtype=float), float(s["lambda"]))
        return cls(features, float(d["intercept"]), smooths, bool(d["converged"]))


@dataclass
class _Term:
    feature: FeatureName
    basis: SplineBasis
    Z: np.ndarray          # d x (d-1), null space of the centering constraint
    root_penalty: np.ndarray  # D @ Z, so the penalty is ||root_penalty @ theta||^2
    cols: slice


def _build_terms(design: Design, n_basis, degree, order):
    n = len(design)
    blocks = [np.ones((n, 1))]
    terms = []
    col = 1
    for j, f in enumerate(design.features):
        x = design.X[:, j]
        lo, hi = float(x.min()), float(x.max())
        if not hi > lo:
            raise SingularDesignError(f"smooth {f.value}: covariate is constant", term=f.value)
        basis = SplineBasis.equidistant(lo, hi, n_basis, degree)
        B = basis.evaluate(x)
        # sum_i f(x_i) = 0  <=>  (1'B) gamma = 0
        q, _ = np.linalg.qr(B.sum(axis=0)[:, None], mode="complete")
        Z = q[:, 1:]
        blocks.append(B @ Z)
        terms.append(_Term(f, basis, Z, difference_matrix(basis.n_basis, order) @ Z,
                           slice(col, col + Z.shape[1])))
        col += Z.shape[1]
    return np.hstack(blocks), terms


def _penalty_rows(terms, lams, n_cols):
    rows = []
    for term in terms:
        R = np.zeros((term.root_penalty.shape[0], n_cols))
        R[:, term.cols] = np.sqrt(lams[term.feature]) * term.root_penalty
        rows.append(R)
    return np.vstack(rows) if rows else np.zeros((0, n_cols))


def _penalty(theta, E):
    return float(np.sum((E @ theta) ** 2))


def _solve(X, w, z, E, terms):
    """Penalized weighted LS by QR of ``[sqrt(W) X; E]``; also returns tr(H)."""
    sw = np.sqrt(w)
    A = np.vstack([X * sw[:, None], E])
    norms = np.linalg.norm(A, axis=0)
    q, r = np.linalg.qr(A / norms)
    d = np.abs(np.diag(r))
    bad = np.flatnonzero(d <= 1e-10 * d.max())
    if bad.size:
        j = int(bad[0])
        name = next((t.feature.value for t in terms if t.cols.start <= j < t.cols.stop),
                    "intercept")
        raise SingularDesignError(f"singular penalized system in smooth {name}", term=name)
    rhs = np.concatenate([sw * z, np.zeros(E.shape[0])])
    theta = np.linalg.solve(r, q.T @ rhs) / norms
    edf = float(np.sum(q[: X.shape[0]] ** 2))
    return theta, edf


def pirls(X, y, E, terms, theta0=None, *, tol=TOL, max_iter=MAX_ITER):
    """Penalized IRLS at fixed smoothing weights (encoded in ``E``).

    Returns ``(theta, converged, trace, gcv, edf)``; ``trace`` holds the
    penalized deviance per accepted iterate and never increases.
    """
    n = X.shape[0]
    theta = np.zeros(X.shape[1]) if theta0 is None else theta0.copy()
    eta = X @ theta
    pdev = binomial_deviance(y, eta) + _penalty(theta, E)
    trace = [pdev]
    converged = False
    for _ in range(max_iter):
        mu = expit(eta)
        w = np.maximum(mu * (1.0 - mu), 1e-12)
        z = eta + (y - mu) / w
        proposal, _ = _solve(X, w, z, E, terms)
        new_eta = X @ proposal
        new_pdev = binomial_deviance(y, new_eta) + _penalty(proposal, E)
        halvings = 0
        while not new_pdev <= pdev and halvings < MAX_HALVINGS:
            proposal = 0.5 * (theta + proposal)
            new_eta = X @ proposal
            new_pdev = binomial_deviance(y, new_eta) + _penalty(proposal, E)
            halvings += 1
        if not new_pdev <= pdev:
            break
        change = abs(pdev - new_pdev) / (abs(new_pdev) + 0.1)
        theta, eta, pdev = proposal, new_eta, new_pdev
        trace.append(pdev)
        if change < tol:
            converged = True
            break

    mu = expit(eta)
    w = np.maximum(mu * (1.0 - mu), 1e-12)
    z = eta + (y - mu) / w
    _, edf = _solve(X, w, z, E, terms)
    # sqrt(W)(z - X theta) reduces to the Pearson residuals at the fit
    rss = float(np.sum((y - mu) ** 2 / w))
    gcv = n * rss / (n - edf) ** 2 if n > edf else np.inf
    return theta, converged, trace, gcv, edf


def fit_pspline_gam(rows, lambda_grid=DEFAULT_LAMBDA_GRID, *, n_basis=N_BASIS,
                    degree=DEGREE, penalty_order=PENALTY_ORDER, tol=TOL,
                    max_iter=MAX_ITER) -> SplineModel:
    """Fit one P-spline smooth per feature with GCV-chosen smoothing weights.

    Smoothing weights start at the middle of ``lambda_grid``. Each smooth in
    turn is then set to the grid value minimising GCV with the others held
    fixed (a single coordinate pass). A one-element grid fits at that
    weight directly.
    """
    grid = [float(v) for v in np.atleast_1d(np.asarray(lambda_grid, dtype=float))]
    if not grid:
        raise ConfigError("lambda_grid is empty")
    if any(not np.isfinite(v) or v < 0 for v in grid):
        raise ConfigError("lambda_grid values must be finite and non-negative")
    design: Design = as_design(rows)
    n, p = design.X.shape
    if n < n_basis + 2:
        raise InsufficientDataError(f"need at least {n_basis + 2} rows, got {n}")
    if set(np.unique(design.y).tolist()) != {0, 1}:
        raise DataError("both outcome labels must be present")
    y = design.y.astype(float)

    X, terms = _build_terms(design, n_basis, degree, penalty_order)
    lams = {t.feature: grid[len(grid) // 2] for t in terms}

    def fit_at(lam_map, theta0=None):
        E = _penalty_rows(terms, lam_map, X.shape[1])
        return pirls(X, y, E, terms, theta0, tol=tol, max_iter=max_iter)

    best = fit_at(lams)
    if len(grid) > 1:
        for term in terms:
            start = best[0]
            for lam in grid:
                trial = dict(lams, **{term.feature: lam})
                result = fit_at(trial, start)
                if result[3] < best[3]:
                    best, lams = result, trial
    theta, converged, trace, gcv, edf = best

    smooths = {
        t.feature: Smooth(t.feature, t.basis, t.Z @ theta[t.cols], lams[t.feature])
        for t in terms
    }
    return SplineModel(
        features=design.features,
        intercept=float(theta[0]),
        smooths=smooths,
        converged=converged,
        gcv=float(gcv),
        edf=float(edf),
        fitted=X @ theta,
        penalized_trace=tuple(trace),
    )


def predict_prob(model: SplineModel, row: Mapping[FeatureName, float]) -> float:
    return model.predict_row(row)


@dataclass(frozen=True)
class EffectCurve:
    feature: FeatureName
    x: np.ndarray
    values: np.ndarray


def effect_curve(model: SplineModel, feature: FeatureName, grid_size: int = 50) -> EffectCurve:
    """The centered smooth of ``feature`` on ``grid_size`` equidistant points of its range."""
    feature = FeatureName(feature)
    if feature not in model.smooths:
        raise ConfigError(f"model has no smooth for {feature.value}")
    if grid_size < 2:
        raise ConfigError("grid_size must be >= 2")
    s = model.smooths[feature]
    x = np.linspace(*s.basis.domain, grid_size)
    return EffectCurve(feature, x, s(x))
