"""
Running a two-treatment experiment run by run
=============================================

Observations arrive with their own precisions, so some treatment ends up
better measured than planned.  After every run the adaptive rule looks at
the information actually collected and steers the next run towards the
treatment that fell behind.  Here the data are simulated; in practice the
same loop is driven from the command line with ``rsdesign advise``.
"""

import numpy as np

from rsdesign.adaptive import Mode, initialize, next_plan, realize, record_run
from rsdesign.designs import builtin_design
from rsdesign.error_models import ErrorModel, sample

model = ErrorModel.hetero_normal_gamma(alpha=0.25, beta=0.25)
design = builtin_design("balanced2", 24)
truth = np.array([1.0, 0.0])  # treatment means
rng = np.random.default_rng(2024)

state = initialize(design, model, n1=4, mode=Mode.RRSD)
plan = state.pending
while plan is not None:
    alloc = realize(plan, rng)
    precisions, errors = sample(model, rng, alloc.size)
    record_run(state, plan, truth[alloc] + errors, precisions=precisions)
    print(f"run {state.run_index}: {alloc.size} obs -> counts {state.counts.tolist()}, "
          f"u = {np.round(state.u_current, 3).tolist()}")
    plan = next_plan(state)

print("final counts:", state.counts.tolist())
print("estimated means:", np.round(state.eta_hat, 3).tolist())
