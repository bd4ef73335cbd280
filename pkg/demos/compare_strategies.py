"""
Fixed versus adaptive designs in a short simulation
===================================================

A small version of the two-treatment study: the same errors are fed to a
fixed balanced design and to both adaptive strategies, and the efficiency of
the lower bound for the treatment difference is compared.  Increase
``ITERATIONS`` to 2000 for publication-grade numbers.
"""

from rsdesign.reproduce import fig1_config, nig_exact_lb_eff
from rsdesign.montecarlo import paired_comparison, run_scenario

ITERATIONS = 300
ALPHA, N = 0.125, 36

print(f"exact LB efficiency of the fixed design: {nig_exact_lb_eff(ALPHA, ALPHA, N):.4f}")
reports = {}
for strategy in ("Fixed", "RRSD", "DRSD"):
    rep = run_scenario(fig1_config(ALPHA, N, strategy, iterations=ITERATIONS))
    reports[strategy] = rep
    print(f"{strategy:5s} lb_eff = {rep.lb_eff:.3f} +- {rep.lb_eff_se:.3f}")

diff, lo, hi = paired_comparison(reports["DRSD"], reports["Fixed"], "lb_eff")
print(f"DRSD - Fixed: {diff:.3f}, 95% interval ({lo:.3f}, {hi:.3f})")
