"""
Expected versus relevant-subset information
===========================================

The Fisher information of a location model averages over every data set the
experiment could have produced.  Once the data are in, the information
carried by *this* data set can be larger or smaller.  This script shows the
difference for Cauchy errors, where it is large.
"""

import numpy as np

from rsdesign.error_models import ErrorModel, moment_table, sample
from rsdesign.estimation import mle_location
from rsdesign.information import SupportGroup, relevant_info_eta

model = ErrorModel.cauchy(tau=1.0)
table = moment_table(model)
print(f"expected information per observation: mu = {table.mu:.4f}")
print(f"sd of observed information / mu:       gamma_alt = {table.gamma_alt:.4f}")

# Two groups of five responses with the same centre: one tight, one with an
# outlier.  The MLE ignores the outlier but the group still carries less
# information about its location.
tight = np.array([-0.3, -0.1, 0.0, 0.2, 0.3])
spread = np.array([-0.3, -0.1, 0.0, 0.2, 9.0])
for label, y in (("tight", tight), ("outlier", spread)):
    eta = mle_location(model, y)
    h = relevant_info_eta(model, SupportGroup(0, y, eta))
    print(f"{label:8s} eta_hat = {eta:+.4f}  h = {h:.3f}  (Fisher: {y.size * table.mu:.3f})")

# Averaged over data sets, h recovers the Fisher information n * mu.
rng = np.random.default_rng(7)
hs = []
for _ in range(2000):
    y = sample(model, rng, 5)
    hs.append(relevant_info_eta(model, SupportGroup(0, y, mle_location(model, y))))
hs = np.array(hs)
print(f"mean h over 2000 data sets: {hs.mean():.3f} +- {hs.std(ddof=1) / np.sqrt(hs.size):.3f}")
print(f"spread of h: 10% {np.quantile(hs, 0.1):.2f}, 90% {np.quantile(hs, 0.9):.2f}")
