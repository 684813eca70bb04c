"""Partial dependence (PDP), ICE curves and 2-D dependence surfaces.

Works with any fitted model exposing ``features`` and ``predict_proba(X)``.
All values are on the probability scale. PDP values are plain row-order
sums of the per-row predictions, so they equal the ICE column means
independently of how predictions were computed.

PDPs describe the model, not causal effects, and they are most faithful
when the varied feature is roughly independent of the others.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._seeding import derive_rng
from .errors import ConfigError, DataError
from .features import Design, FeatureName, as_design

GRID_SIZE = 50
SURFACE_GRID = (30, 30)
# heatmap gradient, low to high probability
HEATMAP_COLORS = ("#2c7bb6", "#ffd92f")
SVG_SALT = "tennis-sel"


@dataclass(frozen=True)
class DependenceCurve:
    feature: FeatureName
    grid: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class IceBundle:
    """One ICE curve per row (``curves[i, j]`` at ``grid[j]``) plus their mean."""

    feature: FeatureName
    grid: np.ndarray
    curves: np.ndarray
    pdp: np.ndarray
    rows: np.ndarray

    @property
    def curve(self) -> DependenceCurve:
        return DependenceCurve(self.feature, self.grid, self.pdp)


@dataclass(frozen=True)
class DependenceSurface:
    features: tuple[FeatureName, FeatureName]
    grid1: np.ndarray
    grid2: np.ndarray
    values: np.ndarray


def _prepare(model, rows, features):
    design: Design = as_design(rows)
    if len(design) == 0:
        raise DataError("need at least one row")
    cols = []
    for f in features:
        f = FeatureName(f)
        if f not in model.features:
            raise ConfigError(f"model does not use feature {f.value}")
        cols.append(model.features.index(f))
    missing = [f.value for f in model.features if f not in design.features]
    if missing:
        raise DataError(f"rows lack model features: {', '.join(missing)}")
    X = design.select(model.features).X.astype(float)
    return X, cols


def _grid(x, size):
    if size < 2:
        raise ConfigError("grid size must be >= 2")
    lo, hi = float(np.min(x)), float(np.max(x))
    return np.linspace(lo, hi, size)


def _row_mean(values):
    """Mean over axis 0 accumulated row by row."""
    acc = np.zeros(values.shape[1:])
    for row in values:
        acc += row
    return acc / values.shape[0]


def _ice_matrix(model, X, col, grid):
    n = X.shape[0]
    stacked = np.repeat(X[None, :, :], len(grid), axis=0)
    stacked[:, :, col] = grid[:, None]
    pred = np.asarray(model.predict_proba(stacked.reshape(-1, X.shape[1])), dtype=float)
    return pred.reshape(len(grid), n).T.copy()


def ice(model, rows, feature, grid_size: int = GRID_SIZE, *, sample: int | None = None,
        seed: int = 0) -> IceBundle:
    """ICE curves of ``feature`` over an equidistant grid on its observed range.

    ``sample`` keeps a seeded subset of rows as curves. The grid and
    ``pdp`` always use all rows, so without sampling ``pdp`` is exactly the
    column mean of ``curves``.
    """
    feature = FeatureName(feature)
    X, (col,) = _prepare(model, rows, [feature])
    grid = _grid(X[:, col], grid_size)
    curves = _ice_matrix(model, X, col, grid)
    keep = np.arange(X.shape[0])
    if sample is not None:
        if sample < 1:
            raise ConfigError("sample must be >= 1")
        if sample < len(keep):
            keep = np.sort(derive_rng(seed, "ice-sample").choice(len(keep), sample, replace=False))
    return IceBundle(feature, grid, curves[keep], _row_mean(curves), keep)


def pdp(model, rows, feature, grid_size: int = GRID_SIZE) -> DependenceCurve:
    """Average prediction as ``feature`` is set to each grid value in every row."""
    return ice(model, rows, feature, grid_size).curve


def pdp_2d(model, rows, f1, f2, grid1_size: int = SURFACE_GRID[0],
           grid2_size: int = SURFACE_GRID[1]) -> DependenceSurface:
    """``values[a, b]`` averages predictions with ``f1 = grid1[a]`` and ``f2 = grid2[b]``."""
    f1, f2 = FeatureName(f1), FeatureName(f2)
    if f1 == f2:
        raise ConfigError("f1 and f2 must differ")
    X, (c1, c2) = _prepare(model, rows, [f1, f2])
    g1 = _grid(X[:, c1], grid1_size)
    g2 = _grid(X[:, c2], grid2_size)
    values = np.empty((len(g1), len(g2)))
    for a, v in enumerate(g1):
        Xa = X.copy()
        Xa[:, c1] = v
        values[a] = _row_mean(_ice_matrix(model, Xa, c2, g2))
    return DependenceSurface((f1, f2), g1, g2, values)


# ---------------------------------------------------------------- export

def _fmt(v):
    return repr(float(v))


def curve_csv(item) -> str:
    """Grid points as rows: ``x`` and ``pdp``, then ``ice_<row>`` columns for bundles."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(item, IceBundle):
        w.writerow(["feature", "x", "pdp"] + [f"ice_{int(r)}" for r in item.rows])
        for j, x in enumerate(item.grid):
            w.writerow([item.feature.value, _fmt(x), _fmt(item.pdp[j])]
                       + [_fmt(v) for v in item.curves[:, j]])
    else:
        w.writerow(["feature", "x", "pdp"])
        for x, v in zip(item.grid, item.values):
            w.writerow([item.feature.value, _fmt(x), _fmt(v)])
    return buf.getvalue()


def surface_csv(surface: DependenceSurface) -> str:
    f1, f2 = surface.features
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f1.value, f2.value, "value"])
    for a, x1 in enumerate(surface.grid1):
        for b, x2 in enumerate(surface.grid2):
            w.writerow([_fmt(x1), _fmt(x2), _fmt(surface.values[a, b])])
    return buf.getvalue()


def _save_svg(fig, path):
    import matplotlib

    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata={"Date": None})


def curve_svg(item, path, *, ylabel: str = "predicted winning probability",
              show_pdp: bool = True) -> None:
    """Line chart: ICE curves thin grey, PDP thick black."""
    from matplotlib.figure import Figure

    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    if isinstance(item, IceBundle):
        for c in item.curves:
            ax.plot(item.grid, c, color="0.6", linewidth=0.4, alpha=0.6)
        if show_pdp:
            ax.plot(item.grid, item.pdp, color="black", linewidth=2.5)
    else:
        ax.plot(item.grid, item.values, color="black", linewidth=2.5)
    ax.set_xlabel(f"{item.feature.label} (player 1 - player 2)")
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    _save_svg(fig, path)


def effect_svg(curve, path) -> None:
    """Line chart of a spline effect curve (logit scale)."""
    from matplotlib.figure import Figure

    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    ax.plot(curve.x, curve.values, color="black", linewidth=2)
    ax.axhline(0.0, color="0.7", linewidth=0.8)
    ax.set_xlabel(f"{curve.feature.label} (player 1 - player 2)")
    ax.set_ylabel("effect on the logit")
    fig.tight_layout()
    _save_svg(fig, path)


def surface_svg(surface: DependenceSurface, path) -> None:
    """Heatmap on a blue-to-yellow gradient (probability scale)."""
    from matplotlib.colors import LinearSegmentedColormap
    from matplotlib.figure import Figure

    cmap = LinearSegmentedColormap.from_list("sel", HEATMAP_COLORS)
    fig = Figure(figsize=(6, 5))
    ax = fig.add_subplot()
    mesh = ax.pcolormesh(surface.grid1, surface.grid2, surface.values.T, cmap=cmap,
                         shading="nearest", rasterized=False)
    fig.colorbar(mesh, ax=ax, label="predicted winning probability")
    ax.set_xlabel(surface.features[0].label)
    ax.set_ylabel(surface.features[1].label)
    fig.tight_layout()
    _save_svg(fig, path)


def export_plots(items: Sequence, path, *, svg: bool = True) -> list[Path]:
    """Write ``<path>_<n>.csv`` (and ``.svg``) per item; returns the files written.

    A single item is written to ``path`` itself with the suffix swapped.
    """
    path = Path(path)
    if not isinstance(items, (list, tuple)):
        items = [items]
    written = []
    for n, item in enumerate(items):
        stem = path.with_suffix("") if len(items) == 1 else path.with_name(f"{path.stem}_{n}")
        csv_path = stem.with_suffix(".csv")
        if isinstance(item, DependenceSurface):
            csv_path.write_text(surface_csv(item), encoding="utf-8")
        else:
            csv_path.write_text(curve_csv(item), encoding="utf-8")
        written.append(csv_path)
        if svg:
            svg_path = stem.with_suffix(".svg")
            if isinstance(item, DependenceSurface):
                surface_svg(item, svg_path)
            else:
                curve_svg(item, svg_path)
            written.append(svg_path)
    return written
