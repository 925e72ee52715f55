"""
Interval metrics, calibration and predictive entropy
=====================================================

Scores a set of Gaussian predictions. Using the generator's true mean and sigma
gives a perfectly calibrated reference.
"""

import numpy as np

from uaboost import ProbabilisticPrediction
from uaboost.data import SyntheticSpec, generate_synthetic
from uaboost.metrics import IntervalSpec, calibration_curve, mpiw, picp, predictive_entropy

ds = generate_synthetic(SyntheticSpec.uniform("heteroscedastic", n_samples=2000, seed=3))
truth = ProbabilisticPrediction(ds.mu_star, ds.sigma_star)

for delta in (1, 2, 3):
    spec = IntervalSpec(delta)
    print(f"delta={delta}: MPIW={mpiw(truth, spec):.3f}  PICP={picp(truth, ds.y, spec):.1f}%")

curve = calibration_curve(truth, ds.y)
print("nominal ", np.round(curve.nominal_levels, 2))
print("observed", np.round(curve.observed_fractions, 3))

# an overconfident model (sigmas halved) falls below the diagonal
over = ProbabilisticPrediction(ds.mu_star, ds.sigma_star / 2)
print("halved  ", np.round(calibration_curve(over, ds.y).observed_fractions, 3))

# halving every sigma lowers every entropy by ln 2
h = predictive_entropy(truth)
h_over = predictive_entropy(over)
print(f"mean entropy {h.mean_entropy:.4f} -> {h_over.mean_entropy:.4f} (diff {h.mean_entropy - h_over.mean_entropy:.4f})")
print(f"KDE bandwidth {h.bandwidth:.4f} over {h.grid.size} grid points")
