"""Logistic regression with linear effects, fitted by IRLS (Newton-Raphson)."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DataError, InsufficientDataError, SingularDesignError
from .features import Design, FeatureName, FeatureRow, as_design

TOL = 1e-10
MAX_ITER = 100
MAX_HALVINGS = 30
# |eta| beyond this means fitted probabilities are numerically 0 or 1
SEPARATION_ETA = 30.0


def binomial_deviance(y, eta):
    """-2 log-likelihood of Bernoulli outcomes ``y`` under logits ``eta``."""
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return 2.0 * float(np.sum(y * np.logaddexp(0.0, -eta) + (1.0 - y) * np.logaddexp(0.0, eta)))


def _scaled_qr(A, what):
    """QR of ``A`` with unit-norm columns; raises when ``A`` is rank deficient.

    Returns ``(q, r, norms)`` such that ``A = q @ r @ diag(norms)``.
    """
    norms = np.linalg.norm(A, axis=0)
    if not np.all(np.isfinite(norms)) or np.any(norms == 0):
        raise SingularDesignError(f"{what} has an all-zero column")
    q, r = np.linalg.qr(A / norms)
    d = np.abs(np.diag(r))
    if d.size and (d.min() <= 1e-10 * d.max() or not np.all(np.isfinite(d))):
        raise SingularDesignError(f"{what} is rank deficient")
    return q, r, norms


def _wls_step(X1, w, z):
    sw = np.sqrt(w)
    q, r, norms = _scaled_qr(X1 * sw[:, None], "weighted design")
    return np.linalg.solve(r, q.T @ (sw * z)) / norms


@dataclass(frozen=True)
class LinearModel:
    """Fitted intercept and per-feature slopes on the logit scale."""

    features: tuple[FeatureName, ...]
    intercept: float
    coefficients: dict[FeatureName, float]
    converged: bool
    deviance: float
    n_iter: int = 0
    deviance_trace: tuple[float, ...] = field(default=(), repr=False, compare=False)

    @property
    def beta(self) -> np.ndarray:
        return np.array([self.intercept] + [self.coefficients[f] for f in self.features])

    def linear_predictor(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, len(self.features))
        b = self.beta
        return b[0] + X @ b[1:]

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.linear_predictor(X))

    def predict_row(self, row: Mapping[FeatureName, float]) -> float:
        values = row.values if isinstance(row, FeatureRow) else row
        x = np.array([[values[f] for f in self.features]], dtype=float)
        return float(self.predict_proba(x)[0])

    def to_dict(self) -> dict:
        return {
            "learner": "linear",
            "features": [f.value for f in self.features],
            "intercept": self.intercept,
            "coefficients": {f.value: self.coefficients[f] for f in self.features},
            "converged": self.converged,
            "deviance": self.deviance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> LinearModel:
        features = tuple(FeatureName(f) for f in d["features"])
        return cls(
            features=features,
            intercept=float(d["intercept"]),
            coefficients={f: float(d["coefficients"][f.value]) for f in features},
            converged=bool(d["converged"]),
            deviance=float(d["deviance"]),
        )


def irls(X, y, *, tol=TOL, max_iter=MAX_ITER):
    """Maximise the logistic log-likelihood of ``y`` on ``[1, X]``.

    Returns ``(beta, converged, deviance_trace)``. The trace starts at the
    deviance of ``beta = 0`` and is non-increasing: a Newton step that
    raises the deviance is halved up to ``MAX_HALVINGS`` times.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    X1 = np.column_stack([np.ones(n), X])
    _scaled_qr(X1, "design matrix")

    beta = np.zeros(X1.shape[1])
    eta = X1 @ beta
    dev = binomial_deviance(y, eta)
    trace = [dev]
    converged = False
    for _ in range(max_iter):
        mu = expit(eta)
        w = mu * (1.0 - mu)
        z = eta + (y - mu) / w
        try:
            proposal = _wls_step(X1, w, z)
        except SingularDesignError:
            # weights collapsed under separation; keep the last iterate
            break
        new_eta = X1 @ proposal
        new_dev = binomial_deviance(y, new_eta)
        halvings = 0
        while not new_dev <= dev and halvings < MAX_HALVINGS:
            proposal = 0.5 * (beta + proposal)
            new_eta = X1 @ proposal
            new_dev = binomial_deviance(y, new_eta)
            halvings += 1
        if not new_dev <= dev:
            break
        if np.max(np.abs(new_eta)) > SEPARATION_ETA:
            break
        change = abs(dev - new_dev) / (abs(new_dev) + 0.1)
        beta, eta, dev = proposal, new_eta, new_dev
        trace.append(dev)
        if change < tol:
            converged = True
            break
    return beta, converged, trace


def fit_logistic(rows, *, tol=TOL, max_iter=MAX_ITER) -> LinearModel:
    """Maximum-likelihood logistic fit of ``rows`` (a :class:`Design` or FeatureRows).

    Perfectly separated data give ``converged=False`` with the last finite
    iterate; a rank-deficient design raises :class:`SingularDesignError`.
    """
    design: Design = as_design(rows)
    n, p = design.X.shape
    if n < p + 2:
        raise InsufficientDataError(f"need at least {p + 2} rows for {p} features, got {n}")
    labels = set(np.unique(design.y).tolist())
    if labels != {0, 1}:
        raise DataError("both outcome labels must be present")
    beta, converged, trace = irls(design.X, design.y, tol=tol, max_iter=max_iter)
    return LinearModel(
        features=design.features,
        intercept=float(beta[0]),
        coefficients={f: float(b) for f, b in zip(design.features, beta[1:])},
        converged=converged,
        deviance=float(trace[-1]),
        n_iter=len(trace) - 1,
        deviance_trace=tuple(trace),
    )


def predict_prob(model: LinearModel, row: Mapping[FeatureName, float]) -> float:
    return model.predict_row(row)


def log_likelihood_gradient(model: LinearModel, design: Design) -> np.ndarray:
    """Score vector ``[1, X]^T (y - mu)`` at the model's coefficients."""
    X = design.select(model.features).X
    X1 = np.column_stack([np.ones(len(X)), X])
    return X1.T @ (design.y - model.predict_proba(X))


INTERCEPT = "(Intercept)"


def coefficient_report(model: LinearModel, include_intercept: bool = False) -> list[tuple[str, float]]:
    """``(name, estimate)`` rows in canonical feature order.

    The intercept row is added on request, or when the model has no features.
    """
    rows = [(f.label, model.coefficients[f]) for f in model.features]
    if include_intercept or not rows:
        rows.insert(0, (INTERCEPT, model.intercept))
    return rows


def render_coefficients(rows, fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variable", "estimate"])
        for name, value in rows:
            w.writerow([name, repr(float(value))])
        return buf.getvalue()
    if fmt == "md":
        lines = ["| Variable | Estimate |", "|---|---:|"]
        lines += [f"| {name} | {value:.4f} |" for name, value in rows]
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown format {fmt!r}")


def parse_coefficients(text: str) -> list[tuple[str, float]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != ["variable", "estimate"]:
        raise DataError("coefficient table header must be variable,estimate")
    return [(name, float(value)) for name, value in reader]
