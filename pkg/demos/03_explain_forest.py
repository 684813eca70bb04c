"""
Partial dependence and ICE curves for a random forest
======================================================

Fits the forest on every match and looks at how the predicted winning
probability moves with the Elo difference, averaged (PDP) and row by row
(ICE). Files land in ``demos/out``.
"""

# %%
from pathlib import Path

import numpy as np

from tennis_sel import annotate_pre_match_elo, build_design, fit_forest, generate_synthetic
from tennis_sel.explain import curve_svg, export_plots, ice, pdp, pdp_2d, surface_svg
from tennis_sel.features import FeatureName as F

out = Path(__file__).resolve().with_name("out")
out.mkdir(exist_ok=True)

data = generate_synthetic(3, 4, 128, seed=1)
design = build_design(annotate_pre_match_elo(data), (F.Points, F.Rank, F.Elo, F.Age30))
forest = fit_forest(design, 2, 200, seed=3)

# %%
# The PDP is the column mean of the ICE matrix, computed over all rows
# even when only a sample of curves is kept for the plot.
bundle = ice(forest, design, F.Elo, 40, sample=60, seed=0)
print("PDP from", round(bundle.pdp[0], 3), "to", round(bundle.pdp[-1], 3))
curve_svg(bundle, out / "elo_ice.svg")

# %%
# A positive age difference means player 1 sits further from 30.
age = pdp(forest, design, F.Age30, 30)
print(np.round(age.values, 3))

# %%
surface = pdp_2d(forest, design, F.Elo, F.Age30, 20, 20)
surface_svg(surface, out / "elo_age30.svg")
print([p.name for p in export_plots([age, surface], out / "dependence.csv")])
