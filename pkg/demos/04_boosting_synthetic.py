"""
Boosting across modalities on synthetic data
=============================================

Three noisy views of the same latent variables. Each stage is trained on one
view with per-sample weights from the previous stage: squared residuals for the
vanilla chain, predicted sigmas for the uncertainty-aware chain.
"""

import numpy as np

from uaboost import GaussianMLP, MlpConfig, boost_fit, predict, rank_modalities
from uaboost.data import SyntheticSpec, generate_synthetic, train_val_split
from uaboost.metrics import rmse

ds = generate_synthetic(SyntheticSpec.uniform("heteroscedastic", n_samples=1500, seed=0))
tr, te = train_val_split(len(ds.y), 0.2, seed=0)
train = {m: v.take(tr) for m, v in ds.modalities.items()}
test = {m: v.take(te) for m, v in ds.modalities.items()}


def factory(modality_id):
    return GaussianMLP(MlpConfig(max_epochs=200, seed=0))


# rank views by each learner's own early-stopping validation RMSE, never by test data
alone = {m: factory(m).fit(train[m].values, ds.y[tr]) for m in train}
scores = {m: alone[m].validation_rmse() for m in alone}
order = rank_modalities(scores)
print("order", order, {m: round(s, 3) for m, s in scores.items()})

for mode in ("vanilla", "ua", "ua-weighted"):
    chain, trace = boost_fit(mode, train, ds.y[tr], factory, order, first_stage=alone[order[0]])
    fused, per = predict(chain, test)
    stage_sigma = [round(float(per[m].sigmas.mean()), 3) for m in chain.order]
    print(f"{mode:<12} RMSE {rmse(fused, ds.y[te]):.3f}   mean sigma per stage {stage_sigma}")

# the weights a stage saw are kept in the trace; they always average to one
print("stage 2 weights: mean", trace.stages[1].weights.mean().round(6), "max", trace.stages[1].weights.max().round(2))
