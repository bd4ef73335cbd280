"""Scenario definitions for the reference simulation studies.

Each target has a fixed seed so that the tables it produces are stable:

``fig1``
    Two-treatment comparison with normal errors of gamma-distributed
    precision, ``alpha = beta`` in {1/4, 1/8}, LB efficiency of the
    treatment difference over a sweep of ``n``.
``table1``
    2x2 factorial with Cauchy errors at ``n = 60``: scaled RSLB and MLE
    covariance matrices for Fixed, RRSD and DRSD, plus the CRLB.
``fig2``
    Quadratic regression with generalized-normal errors (``zeta = 10``):
    G and D efficiencies of the minimax design, its randomized version and
    the DRSDs started from each.
"""

from .designs import builtin_design, builtin_random_design, crlb
from .error_models import ErrorModel
from .montecarlo import ScenarioConfig, efficiencies, run_scenario

TARGET_SEEDS = {"fig1": 1, "fig2": 1, "table1": 1}
FIG1_SWEEP = (12, 20, 28, 36, 44, 52, 60, 80, 100)
FIG2_SWEEP = (8,) + tuple(range(10, 101, 3))
STRATEGIES = ("Fixed", "RRSD", "DRSD")


def nig_exact_lb_eff(alpha, beta, n):
    """Exact LB efficiency of the balanced two-treatment design for the difference."""
    per_arm = alpha * n / 2
    rslb = beta * 2 / (per_arm - 1)
    bound = (beta / alpha) * 4 / n
    return bound / rslb


def fig1_config(alpha, n, strategy, *, iterations=2000, seed=TARGET_SEEDS["fig1"]):
    return ScenarioConfig(
        model=ErrorModel.hetero_normal_gamma(alpha, alpha),
        design=builtin_design("balanced2", n),
        strategy=strategy, theta_true=[1.0, 0.0], n1=4,
        iterations=iterations, seed=seed, contrast=[0.0, 1.0],
    )


def table1_config(strategy, *, n=60, iterations=2000, seed=TARGET_SEEDS["table1"]):
    return ScenarioConfig(
        model=ErrorModel.cauchy(1.0),
        design=builtin_design("factorial22", n),
        strategy=strategy, theta_true=[1.0, 1.0, 1.0, 1.0], n1=8,
        iterations=iterations, seed=seed,
    )


FIG2_DESIGNS = {
    "xi_G": ("Fixed", False),
    "pi_G": ("Fixed", True),
    "DRSD_xi_G": ("DRSD", False),
    "DRSD_pi_G": ("DRSD", True),
}


def fig2_config(label, n, *, iterations=2000, seed=TARGET_SEEDS["fig2"], criterion="G"):
    strategy, randomized = FIG2_DESIGNS[label]
    design = (builtin_random_design if randomized else builtin_design)("g_optimal_quadratic", n)
    return ScenarioConfig(
        model=ErrorModel.gnd(10.0, 1.0), design=design, strategy=strategy,
        theta_true=[1.0, 1.0, 1.0], n1=6, first_run=(2, 2, 2),
        iterations=iterations, seed=seed, criterion=criterion,
    )


def reproduce_fig1(*, sweep=FIG1_SWEEP, iterations=2000, seed=None, workers=1, progress=None):
    seed = TARGET_SEEDS["fig1"] if seed is None else seed
    rows = []
    for alpha in (0.25, 0.125):
        tag = f"a={alpha:g}"
        for n in sweep:
            rows.append((n, "Fixed", f"lb_eff_exact[{tag}]", nig_exact_lb_eff(alpha, alpha, n), None))
            for strategy in STRATEGIES:
                rep = run_scenario(fig1_config(alpha, n, strategy, iterations=iterations, seed=seed),
                                   workers=workers)
                rows.append((n, strategy, f"lb_eff[{tag}]", rep.lb_eff, rep.lb_eff_se))
                if progress:
                    progress(f"fig1 {tag} n={n} {strategy}: lb_eff={rep.lb_eff:.3f}")
    return rows


def reproduce_table1(*, iterations=2000, seed=None, workers=1, progress=None):
    """Matrices of the factorial study, scaled by ``n``, and flat CSV rows."""
    seed = TARGET_SEEDS["table1"] if seed is None else seed
    tables = {}
    rows = []
    n = 60
    for strategy in STRATEGIES:
        cfg = table1_config(strategy, n=n, iterations=iterations, seed=seed)
        rep = run_scenario(cfg, workers=workers, bootstrap=0)
        tables[strategy] = {
            "n_mean_Hinv": (n * rep.mean_Hinv).tolist(),
            "n_mean_Hinv_mc_se": (n * rep.mc_se["mean_Hinv"]).tolist(),
            "n_var_mle": (n * rep.var_mle).tolist(),
            "n_var_mle_mc_se": (n * rep.mc_se["var_mle"]).tolist(),
            "R_effective": rep.R_effective,
        }
        for k in range(4):
            rows.append((n, strategy, f"n_mean_Hinv[{k},{k}]", n * rep.mean_Hinv[k, k],
                         n * rep.mc_se["mean_Hinv"][k, k]))
            rows.append((n, strategy, f"n_var_mle[{k},{k}]", n * rep.var_mle[k, k],
                         n * rep.mc_se["var_mle"][k, k]))
        if progress:
            progress(f"table1 {strategy}: n E[H^-1](1,1)={n * rep.mean_Hinv[0, 0]:.2f}")
    bound = n * crlb(builtin_design("factorial22", n), ErrorModel.cauchy(1.0))
    tables["CRLB"] = {"n_crlb": bound.tolist()}
    for k in range(4):
        rows.append((n, "CRLB", f"n_crlb[{k},{k}]", bound[k, k], None))
    return tables, rows


def reproduce_fig2(*, sweep=FIG2_SWEEP, iterations=2000, seed=None, workers=1, progress=None):
    seed = TARGET_SEEDS["fig2"] if seed is None else seed
    rows = []
    for n in sweep:
        for label in FIG2_DESIGNS:
            rep = run_scenario(fig2_config(label, n, iterations=iterations, seed=seed),
                               workers=workers, bootstrap=0)
            for kind in ("G", "D"):
                eff = efficiencies(rep, criterion=kind)
                rows.append((n, label, f"lb_eff_{kind}", eff["lb_eff"], eff["lb_eff_se"]))
                rows.append((n, label, f"var_eff_{kind}", eff["var_eff"], eff["var_eff_se"]))
            if progress:
                progress(f"fig2 n={n} {label}: var_eff_G={rows[-4][3]:.3f}")
    return rows


def parse_sweep(text):
    return tuple(int(x) for x in text.split(",")) if text else None


__all__ = [
    "TARGET_SEEDS", "FIG1_SWEEP", "FIG2_SWEEP", "nig_exact_lb_eff", "fig1_config",
    "table1_config", "fig2_config", "reproduce_fig1", "reproduce_table1", "reproduce_fig2",
]
