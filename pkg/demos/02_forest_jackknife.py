"""
Random forest with jackknife uncertainty
========================================

A bagged regression forest whose per-query variance comes from the covariance
between bootstrap inclusion counts and tree outputs.
"""

import numpy as np

from uaboost import ForestConfig, RandomForest

rng = np.random.default_rng(0)

# noise grows with |x|, so a good variance estimate should grow too
x = rng.uniform(-3, 3, size=(600, 1))
y = np.sin(x[:, 0]) + 0.1 * (1 + np.abs(x[:, 0])) * rng.normal(size=600)

forest = RandomForest(ForestConfig(n_trees=300, min_samples_leaf=5, seed=0)).fit(x, y)
grid = np.linspace(-3, 3, 7).reshape(-1, 1)
pred = forest.predict(grid)

print("   x    mean   sigma")
for xi, mu, s in zip(grid[:, 0], pred.means, pred.sigmas):
    print(f"{xi:5.1f} {mu:7.3f} {s:7.3f}")

# out-of-bag RMSE needs no held-out data; it is what the ensemble uses to rank modalities
print("OOB RMSE", round(forest.validation_rmse(), 3))

# the variance estimates sigma of the *forest mean*, not the label noise,
# so it is much smaller than the residual spread
print("mean sigma", round(float(pred.sigmas.mean()), 3))
