"""Monte Carlo estimates of the relevant-subset bound, MLE variance and efficiencies.

Every iteration draws its randomness from independent counter-based streams
keyed by ``(seed, iteration, tag, attempt)``.  Errors are drawn per support
point, so the k-th observation placed on point ``i`` sees the same error under
every strategy that shares a seed: Fixed, RRSD and DRSD runs of one scenario
are paired through common random numbers.  Results do not depend on the
number of worker processes.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
import dataclasses
from dataclasses import dataclass, field
import enum
import io
import logging

import numpy as np

from . import adaptive
from .designs import (Criterion, Design, DesignError, RandomDesign, criterion_value,
                      sample_design, spd_inverse)
from .error_models import ErrorModel, Family, elemental_info, sample
from .estimation import ConvergenceError, mle_location, weighted_location
from .information import (InformationError, SupportGroup, fisher_matrix, invariant_info,
                          relevant_info_eta, uv_statistics)
from .quadrature import QuadratureError

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
MAX_RETRIES = 3
BOOTSTRAP_SEED = 20240917
_TAG_DESIGN, _TAG_ALLOC, _TAG_ERRORS = 0, 1, 2


class Strategy(str, enum.Enum):
    FIXED = "Fixed"
    RRSD = "RRSD"
    DRSD = "DRSD"


class SimulationError(RuntimeError):
    pass


@dataclass
class ScenarioConfig:
    """One simulated experiment, repeated ``iterations`` times.

    ``reference`` is the CRLB that efficiencies are measured against.  When it
    is ``None`` the CRLB of the initializing design is used for contrasts, and
    the criterion-optimal approximate design on the same support for
    criteria.
    """

    model: ErrorModel
    design: object
    strategy: Strategy
    theta_true: np.ndarray
    n1: int = None
    iterations: int = 2000
    seed: int = 0
    contrast: np.ndarray = None
    criterion: Criterion = None
    first_run: tuple = None
    reference: np.ndarray = None

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        if isinstance(self.design, Design):
            self.design = RandomDesign.point_mass(self.design)
        self.theta_true = np.asarray(self.theta_true, dtype=float)
        if isinstance(self.criterion, str):
            self.criterion = Criterion(self.criterion)
        if self.contrast is not None:
            self.contrast = np.asarray(self.contrast, dtype=float)
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        first = self.design.atoms[0]
        if first.basis_rows.shape[1] != self.theta_true.size:
            raise ValueError(f"theta_true has {self.theta_true.size} entries but the basis"
                             f" has {first.basis_rows.shape[1]}")
        if first.d != first.basis_rows.shape[1]:
            raise DesignError("simulations need a saturated design (one support point per"
                              " parameter)")
        if self.strategy is not Strategy.FIXED:
            if self.n1 is None:
                raise ValueError("adaptive strategies need n1")
            if not first.d <= self.n1 <= self.n:
                raise ValueError(f"n1 = {self.n1} must lie between d = {first.d} and n = {self.n}")

    @property
    def n(self):
        return self.design.n

    @property
    def p(self):
        return self.theta_true.size


@dataclass
class SimulationReport:
    """Aggregated results of :func:`run_scenario`.

    Efficiencies are oriented to lie in ``(0, 1]`` (bound over estimate);
    the ``*_printed`` entries hold the reciprocal ratios.  ``samples`` keeps
    the per-iteration arrays, in iteration order, for paired comparisons.
    """

    mean_Hinv: np.ndarray
    var_mle: np.ndarray
    mean_theta: np.ndarray
    crlb: np.ndarray
    reference: np.ndarray
    mc_se: dict
    R_effective: int
    failed_iterations: list
    lb_eff: float = None
    var_eff: float = None
    lb_eff_se: float = None
    var_eff_se: float = None
    config: ScenarioConfig = None
    samples: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        def mat(a):
            return None if a is None else np.asarray(a).tolist()
        cfg = self.config
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "scenario": None if cfg is None else config_to_dict(cfg),
            "R_effective": self.R_effective,
            "failed_iterations": list(self.failed_iterations),
            "mean_Hinv": mat(self.mean_Hinv),
            "var_mle": mat(self.var_mle),
            "mean_theta": mat(self.mean_theta),
            "crlb": mat(self.crlb),
            "reference_crlb": mat(self.reference),
            "mc_standard_errors": {k: mat(v) for k, v in sorted(self.mc_se.items())},
            "lb_eff": self.lb_eff,
            "lb_eff_mc_se": self.lb_eff_se,
            "lb_eff_printed": None if not self.lb_eff else 1.0 / self.lb_eff,
            "var_eff": self.var_eff,
            "var_eff_mc_se": self.var_eff_se,
            "var_eff_printed": None if not self.var_eff else 1.0 / self.var_eff,
            "mean_counts": mat(self.samples["counts"].mean(axis=0)) if "counts" in self.samples else None,
        }


def config_to_dict(cfg):
    out = {
        "model": cfg.model.to_dict(),
        "strategy": cfg.strategy.value,
        "theta_true": cfg.theta_true.tolist(),
        "n": cfg.n,
        "n1": cfg.n1,
        "iterations": cfg.iterations,
        "seed": cfg.seed,
    }
    if len(cfg.design.atoms) == 1:
        out["design"] = cfg.design.atoms[0].to_dict()
    else:
        out["design"] = {"random": cfg.design.to_dict()}
    if cfg.contrast is not None:
        out["contrast"] = cfg.contrast.tolist()
    if cfg.criterion is not None:
        out["criterion"] = {"kind": cfg.criterion.kind, "g_grid": cfg.criterion.g_grid}
    if cfg.first_run is not None:
        out["first_run"] = [int(c) for c in cfg.first_run]
    return out


def substream(seed, iteration, tag, attempt=0):
    """Independent Philox generator for one (iteration, purpose, attempt)."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, iteration, tag, attempt])
    return np.random.Generator(np.random.Philox(ss))


class _ErrorStreams:
    """Per-support-point error sequences for one iteration."""

    def __init__(self, model, d, n, seed, iteration, attempt):
        self.model = model
        self.next = np.zeros(d, dtype=int)
        self.draws = []
        for i in range(d):
            rng = substream(seed, iteration, _TAG_ERRORS + i, attempt)
            self.draws.append(sample(model, rng, n))

    def take(self, alloc):
        alloc = np.asarray(alloc, dtype=int)
        e = np.empty(alloc.size)
        a = np.empty(alloc.size) if self.model.family is Family.HETERO_NORMAL_GAMMA else None
        for k, i in enumerate(alloc):
            j = self.next[i]
            self.next[i] += 1
            if a is None:
                e[k] = self.draws[i][j]
            else:
                a[k] = self.draws[i][0][j]
                e[k] = self.draws[i][1][j]
        return e, a


def _fixed_groups(cfg, atom, streams, rng_alloc):
    counts = atom.counts
    if counts is None:
        alloc = adaptive.first_run_allocation(atom, atom.n, rng_alloc)
    else:
        alloc = np.repeat(np.arange(atom.d), counts)
    eta_true = atom.basis_rows @ cfg.theta_true
    e, a = streams.take(alloc)
    y = eta_true[alloc] + e
    model = cfg.model
    h = np.zeros(atom.d)
    eta_hat = np.full(atom.d, np.nan)
    for i in range(atom.d):
        mask = alloc == i
        if not mask.any():
            continue
        if a is not None:
            eta_hat[i] = weighted_location(y[mask], a[mask])
        else:
            eta_hat[i] = mle_location(model, y[mask])
        h[i] = relevant_info_eta(model, SupportGroup(i, y[mask], eta_hat[i],
                                                     None if a is None else a[mask]))
    return alloc, eta_hat, h


def _adaptive_groups(cfg, atom, streams, rng_alloc):
    mode = adaptive.Mode.RRSD if cfg.strategy is Strategy.RRSD else adaptive.Mode.DRSD
    state = adaptive.initialize(atom, cfg.model, cfg.n1, mode, rng_alloc,
                                first_run=cfg.first_run)
    eta_true = atom.basis_rows @ cfg.theta_true
    plan = state.pending
    while True:
        alloc = adaptive.realize(plan, rng_alloc)
        e, a = streams.take(alloc)
        adaptive.record_run(state, plan, eta_true[alloc] + e, precisions=a)
        if state.complete:
            break
        plan = adaptive.next_plan(state)
    return np.asarray(state.support_index), state.eta_hat, state.h


def simulate_once(cfg, iteration, attempt=0):
    """One experiment: returns the per-iteration quantities as a dict."""
    atom = sample_design(cfg.design, substream(cfg.seed, iteration, _TAG_DESIGN, attempt))
    rng_alloc = substream(cfg.seed, iteration, _TAG_ALLOC, attempt)
    streams = _ErrorStreams(cfg.model, atom.d, atom.n, cfg.seed, iteration, attempt)
    if cfg.strategy is Strategy.FIXED:
        alloc, eta_hat, h = _fixed_groups(cfg, atom, streams, rng_alloc)
    else:
        alloc, eta_hat, h = _adaptive_groups(cfg, atom, streams, rng_alloc)
    counts = np.bincount(alloc, minlength=atom.d)
    if np.any(counts == 0):
        raise InformationError("a support point received no observations")
    rows = atom.basis_rows
    theta_hat = np.linalg.solve(rows, eta_hat)
    H = rows.T @ (h[:, None] * rows)
    g = invariant_info(h, elemental_info(cfg.model))
    u, v = uv_statistics(g, atom.weights, atom.n)
    return {"Hinv": spd_inverse(H), "theta": theta_hat, "u": u, "v": v, "counts": counts}


_FAILURES = (ConvergenceError, InformationError, QuadratureError, np.linalg.LinAlgError,
             FloatingPointError)


def _run_chunk(cfg, indices):
    out = []
    for it in indices:
        result, attempts = None, []
        for attempt in range(MAX_RETRIES + 1):
            try:
                result = simulate_once(cfg, it, attempt)
                break
            except _FAILURES as exc:
                attempts.append(f"{type(exc).__name__}: {exc}")
        out.append((it, result, attempts))
    return out


def _collect(cfg, workers):
    indices = np.arange(cfg.iterations)
    if workers is None or workers <= 1 or cfg.iterations < 2:
        return _run_chunk(cfg, indices)
    chunks = np.array_split(indices, min(cfg.iterations, 8 * workers))
    results = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_run_chunk, [cfg] * len(chunks), chunks):
            results.extend(part)
    return results


def _mean_se(stack):
    R = stack.shape[0]
    se = stack.std(axis=0, ddof=1) / np.sqrt(R) if R > 1 else np.full(stack.shape[1:], np.nan)
    return stack.mean(axis=0), se


def _cov_se(theta):
    R = theta.shape[0]
    centered = theta - theta.mean(axis=0)
    prods = centered[:, :, None] * centered[:, None, :]
    cov = prods.sum(axis=0) / max(R - 1, 1)
    se = prods.std(axis=0, ddof=1) / np.sqrt(R) if R > 1 else np.full(cov.shape, np.nan)
    return 0.5 * (cov + cov.T), se


def design_crlb(cfg):
    """CRLB of the initializing design, averaged over a random design's atoms."""
    total = 0.0
    for atom, prob in zip(cfg.design.atoms, cfg.design.probabilities):
        total = total + prob * spd_inverse(fisher_matrix(atom, cfg.model))
    return total


def reference_crlb(cfg):
    if cfg.reference is not None:
        return np.asarray(cfg.reference, dtype=float)
    if cfg.criterion is not None:
        from .designs import reference_crlb as optimal_reference
        return optimal_reference(cfg.design.atoms[0], cfg.model, cfg.criterion)
    return design_crlb(cfg)


def _bound_ratio(reference, estimate, cfg):
    """``bound / estimate`` for the contrast or criterion of ``cfg``."""
    if cfg.contrast is not None:
        c = cfg.contrast
        return float(c @ reference @ c) / float(c @ estimate @ c)
    if cfg.criterion is not None:
        basis = cfg.design.atoms[0].basis
        return (criterion_value(reference, cfg.criterion, basis, scale="covariance")
                / criterion_value(estimate, cfg.criterion, basis, scale="covariance"))
    return None


def bootstrap_indices(R, B, seed=BOOTSTRAP_SEED):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, R, B])))
    return rng.integers(0, R, size=(B, R))


def run_scenario(cfg, *, workers=1, bootstrap=200):
    """Simulate ``cfg.iterations`` experiments and aggregate.

    Iterations that fail (non-convergent MLE, empty support group, singular
    information) are retried with fresh streams up to three times and then
    excluded; ``R_effective`` counts the survivors.
    """
    results = _collect(cfg, workers)
    kept = [r for _, r, _ in results if r is not None]
    failed = [int(it) for it, r, _ in results if r is None]
    for it, r, attempts in results:
        if attempts:
            log.info("iteration %d: %d failed attempt(s): %s", it, len(attempts), attempts[-1])
    if len(kept) < 2:
        raise SimulationError(f"only {len(kept)} of {cfg.iterations} iterations succeeded")
    samples = {k: np.stack([r[k] for r in kept]) for k in kept[0]}
    mean_Hinv, se_Hinv = _mean_se(samples["Hinv"])
    mean_Hinv = 0.5 * (mean_Hinv + mean_Hinv.T)
    mean_theta, se_theta = _mean_se(samples["theta"])
    var_mle, se_var = _cov_se(samples["theta"])
    crlb = design_crlb(cfg)
    ref = reference_crlb(cfg)
    report = SimulationReport(
        mean_Hinv=mean_Hinv, var_mle=var_mle, mean_theta=mean_theta, crlb=crlb,
        reference=ref, mc_se={"mean_Hinv": se_Hinv, "var_mle": se_var, "mean_theta": se_theta},
        R_effective=len(kept), failed_iterations=failed, config=cfg, samples=samples,
    )
    report.lb_eff = _bound_ratio(ref, mean_Hinv, cfg)
    report.var_eff = _bound_ratio(ref, var_mle, cfg)
    if report.lb_eff is not None and bootstrap:
        lb, var = _bootstrap_efficiencies(report, bootstrap)
        report.lb_eff_se = float(lb.std(ddof=1))
        report.var_eff_se = float(var.std(ddof=1))
    return report


def _bootstrap_efficiencies(report, B, idx=None):
    cfg = report.config
    R = report.R_effective
    if idx is None:
        idx = bootstrap_indices(R, B)
    Hinv, theta = report.samples["Hinv"], report.samples["theta"]
    lb = np.empty(len(idx))
    var = np.empty(len(idx))
    for b, sel in enumerate(idx):
        lb[b] = _bound_ratio(report.reference, Hinv[sel].mean(axis=0), cfg)
        var[b] = _bound_ratio(report.reference, np.cov(theta[sel], rowvar=False), cfg)
    return lb, var


def lb_efficiency(report, c=None):
    """``c' F^-1 c / c' E[H^-1] c`` against the report's reference CRLB."""
    if c is None:
        return report.lb_eff
    c = np.asarray(c, dtype=float)
    return float(c @ report.reference @ c) / float(c @ report.mean_Hinv @ c)


def var_efficiency(report, criterion, reference_crlb=None):
    """``Psi(reference) / Psi(Var[theta_hat])`` with covariance-scale criteria."""
    ref = report.reference if reference_crlb is None else np.asarray(reference_crlb)
    if isinstance(criterion, str):
        criterion = Criterion(criterion)
    V = report.var_mle
    if np.linalg.matrix_rank(V) < V.shape[0]:
        raise DesignError("empirical covariance is singular")
    basis = report.config.design.atoms[0].basis if report.config is not None else None
    return (criterion_value(ref, criterion, basis, scale="covariance")
            / criterion_value(V, criterion, basis, scale="covariance"))


def paired_comparison(report_a, report_b, metric="var_eff", *, B=1000, level=0.95):
    """Bootstrap test that ``metric`` of ``report_a`` exceeds that of ``report_b``.

    Both reports must come from the same seed and iteration count so that
    iterations are paired through common random numbers; resampling draws the
    same iteration indices for both.  Returns ``(difference, lower, upper)``
    with a two-sided percentile interval at ``level``.
    """
    if report_a.R_effective != report_b.R_effective or report_a.failed_iterations != report_b.failed_iterations:
        raise SimulationError("paired comparison needs reports over the same iterations")
    idx = bootstrap_indices(report_a.R_effective, B)
    pick = 0 if metric == "lb_eff" else 1
    da = _bootstrap_efficiencies(report_a, B, idx)[pick]
    db = _bootstrap_efficiencies(report_b, B, idx)[pick]
    diff = getattr(report_a, metric) - getattr(report_b, metric)
    lo, hi = np.quantile(da - db, [(1 - level) / 2, (1 + level) / 2])
    return float(diff), float(lo), float(hi)


def uv_variance_study(cfg, *, workers=1, report=None):
    """Empirical covariance matrices of ``u`` and ``v`` across iterations."""
    if report is None:
        report = run_scenario(cfg, workers=workers, bootstrap=0)
    u, v = report.samples["u"], report.samples["v"]
    return np.cov(u, rowvar=False), np.cov(v, rowvar=False)


def write_series(rows, path=None):
    """Write ``(n, strategy, metric, value, mc_se)`` rows as CSV; return the text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "strategy", "metric", "value", "mc_se"])
    for row in rows:
        writer.writerow([row[0], row[1], row[2], repr(float(row[3])),
                         "" if row[4] is None else repr(float(row[4]))])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def efficiencies(report, *, criterion=None, contrast=None, reference=None, bootstrap=200):
    """LB and Var efficiencies of a finished report under another contrast or criterion.

    Returns a dict with ``lb_eff``, ``var_eff`` and their bootstrap standard
    errors.  ``reference`` defaults to the criterion-optimal CRLB for
    criteria and to the initializing design's CRLB for contrasts.
    """
    if isinstance(criterion, str):
        criterion = Criterion(criterion)
    cfg = dataclasses.replace(report.config, criterion=criterion,
                              contrast=None if contrast is None else np.asarray(contrast, float),
                              reference=reference)
    ref = reference_crlb(cfg)
    view = dataclasses.replace(report, config=cfg, reference=ref)
    out = {
        "lb_eff": _bound_ratio(ref, report.mean_Hinv, cfg),
        "var_eff": _bound_ratio(ref, report.var_mle, cfg),
        "lb_eff_se": None,
        "var_eff_se": None,
    }
    if bootstrap:
        lb, var = _bootstrap_efficiencies(view, bootstrap)
        out["lb_eff_se"] = float(lb.std(ddof=1))
        out["var_eff_se"] = float(var.std(ddof=1))
    return out


def contrast_summary(report, c):
    """``c'Var[theta_hat]c``, ``c'E[H^-1]c`` and ``c'F^-1c`` with Monte Carlo standard errors."""
    c = np.asarray(c, dtype=float)
    R = report.R_effective
    q = np.einsum("j,rjk,k->r", c, report.samples["Hinv"], c)
    proj = (report.samples["theta"] - report.samples["theta"].mean(axis=0)) @ c
    sq = proj * proj
    return {
        "var": float(sq.sum() / (R - 1)),
        "var_se": float(sq.std(ddof=1) / np.sqrt(R)),
        "rslb": float(q.mean()),
        "rslb_se": float(q.std(ddof=1) / np.sqrt(R)),
        "crlb": float(c @ report.crlb @ c),
    }
