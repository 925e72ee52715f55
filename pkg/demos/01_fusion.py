"""
Fusing per-modality Gaussian predictions
========================================

Two ways to combine learners that each return a mean and a sigma: the plain
average, and an average that trusts confident learners more.
"""

import numpy as np

from uaboost import ProbabilisticPrediction, fuse_inverse_uncertainty, fuse_mean

# two learners, three samples; the second learner is unsure about sample 0
a = ProbabilisticPrediction(means=[2.0, 1.0, 0.0], sigmas=[1.0, 1.0, 1.0])
b = ProbabilisticPrediction(means=[4.0, 3.0, 0.5], sigmas=[2.0, 1.0, 0.1])

print("plain mean      ", fuse_mean([a, b]))
print("inverse-sigma   ", fuse_inverse_uncertainty([a, b]))

# sample 0: (2/1 + 4/2) / (1/1 + 1/2) = 2.667, pulled toward the confident learner
# sample 1: equal sigmas, so both rules agree
# sample 2: learner b is ten times more confident and dominates

# multiplying every sigma by the same constant changes nothing
scaled = [ProbabilisticPrediction(p.means, 7.5 * p.sigmas) for p in (a, b)]
print("sigmas x 7.5    ", fuse_inverse_uncertainty(scaled))
