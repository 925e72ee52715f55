"""
Gaussian MLP trained with the negative log-likelihood
======================================================

A small tanh network with two outputs, a mean and a softplus sigma, fitted by
Adam with early stopping. On heteroscedastic data the sigma head learns the
noise level.
"""

import numpy as np

from uaboost import GaussianMLP, MlpConfig, gaussian_nll

rng = np.random.default_rng(1)
x = rng.uniform(-2, 2, size=(800, 1))
true_sigma = 0.1 + 0.4 * (x[:, 0] + 2) / 4
y = x[:, 0] ** 2 + true_sigma * rng.normal(size=800)

model = GaussianMLP(MlpConfig(hidden_layer_sizes=(64, 32), seed=0)).fit(x, y)
print(f"stopped after {model.n_epochs_} epochs, val NLL {model.val_nll_:.3f}")

grid = np.linspace(-2, 2, 5).reshape(-1, 1)
pred = model.predict(grid)
for xi, s in zip(grid[:, 0], pred.sigmas):
    print(f"x={xi:+.1f}  sigma={s:.3f}  true={0.1 + 0.4 * (xi + 2) / 4:.3f}")

# per-sample weights rescale each sample's share of the loss
w = np.where(x[:, 0] > 0, 2.0, 0.5)
weighted = GaussianMLP(MlpConfig(seed=0)).fit(x, y, sample_weight=w)
p = weighted.predict(x)
print("weighted NLL on training data", round(gaussian_nll(p.means, p.sigmas, y, w), 3))
