"""
Expanding-window comparison of the three learners
==================================================

Each tournament of the final season is predicted from everything played
before it. A handful of covariate sets keep the run short; pass
``specs=None`` to score all 21.
"""

# %%
from tennis_sel import Learner, ModelSpec, generate_synthetic, render_report
from tennis_sel.evaluation import FitOptions, expanding_window
from tennis_sel.features import FeatureName as F

data = generate_synthetic(3, 4, 128, seed=1)
specs = [
    ModelSpec((F.Points, F.Rank)),
    ModelSpec((F.Points, F.Rank, F.Elo)),
    ModelSpec((F.Elo, F.Age30)),
    ModelSpec((F.Points, F.Rank, F.Elo, F.Age30)),
]

# %%
# 100 trees and a fixed mtry keep this cell under a minute.
report = expanding_window(data, specs, list(Learner), options=FitOptions(seed=1, ntree=100, mtry=2))
print(render_report(report, "md"))

# %%
# Adding Elo to the conventional covariates should lower the Brier score.
for spec in specs:
    s = report.scores(Learner.Linear, spec.key)
    print(f"{spec.label:<28} brier {s.brier:.4f}  rate {s.classification_rate:.3f}")
