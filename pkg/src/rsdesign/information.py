"""Fisher information, relevant-subset information and the u/v statistics.

For a location family the within-group residual configuration is an exact
ancillary.  Conditioning on it, the MLE of a group location has density
proportional to ``exp(l(eta_hat - v) - l(eta_hat))`` in ``v = eta_hat - eta``,
so the conditional expected information is a ratio of two one-dimensional
integrals.  The ancillary itself never has to be formed.
"""

from dataclasses import dataclass
import math

import numpy as np

from .error_models import Family, _info, _loglik, _score, elemental_info, moment_table
from .quadrature import gauss_kronrod

H_RTOL = 1e-7
STATIONARY_TOL = 1e-8
HALF_WIDTH = 50.0
SINGULAR_COND = 1e12
SMALL_GROUP = 8


class InformationError(ValueError):
    pass


@dataclass
class SupportGroup:
    """Responses observed at one support point.

    ``precisions`` is present only for the hetero_normal_gamma model.
    """

    index: int
    responses: np.ndarray
    eta_hat: float
    precisions: np.ndarray = None

    def __len__(self):
        return len(self.responses)


@dataclass
class InfoSummary:
    eta_hat: np.ndarray
    h: np.ndarray
    g: np.ndarray
    u: np.ndarray
    v: np.ndarray
    H: np.ndarray
    F: np.ndarray


def _conditional_integrand(model, y, eta_hat):
    l_hat = _loglik(model, y - eta_hat).sum()

    def integrand(v):
        e = y[:, None] - (eta_hat - v)[None, :]
        # shifted by the maximum l(eta_hat), so the weight never exceeds one
        w = np.exp(_loglik(model, e).sum(axis=0) - l_hat)
        return np.stack([_info(model, e).sum(axis=0) * w, w])

    return integrand


def relevant_info_eta(model, group, *, rtol=H_RTOL):
    """Expected information on a group location given its ancillary."""
    if model.family is Family.HETERO_NORMAL_GAMMA:
        if group.precisions is None or len(group.precisions) != len(group.responses):
            raise InformationError("hetero_normal_gamma groups need one precision per response")
        return float(np.sum(group.precisions))
    y = np.asarray(group.responses, dtype=float)
    if y.size == 0:
        raise InformationError("cannot compute information for an empty group")
    if model.family is Family.GND and model.zeta == 2.0:
        return y.size / model.tau ** 2
    eta_hat = float(group.eta_hat)
    s = _score(model, y - eta_hat).sum()
    if abs(s) > STATIONARY_TOL * (1 + y.size):
        raise InformationError(f"eta_hat is not a stationary point (group score {s:.3g})")

    tau = model.tau
    integrand = _conditional_integrand(model, y, eta_hat)
    spread = 1.0 / math.sqrt(y.size * elemental_info(model))
    width = HALF_WIDTH * tau
    # Small groups can have secondary likelihood modes near single responses;
    # pin those locations (v where a residual vanishes) as breakpoints.
    marks = eta_hat - y if y.size <= SMALL_GROUP else np.empty(0)
    core = np.concatenate([
        spread * np.array([-8, -4, -2, -1, -0.5, 0, 0.5, 1, 2, 4, 8]),
        np.linspace(-width, width, 17),
        marks[np.abs(marks) < width],
    ])
    core = core[np.abs(core) <= width]
    body, _ = gauss_kronrod(integrand, core, rtol=rtol)

    def tail(t):
        # v = width / t maps (0, 1] onto [width, inf); both tails at once
        v = width / t
        return (integrand(v) + integrand(-v)) * (width / (t * t))

    tails, _ = gauss_kronrod(tail, [0.0, 0.25, 1.0], rtol=rtol,
                             atol=1e-3 * rtol * float(np.min(np.abs(body))))
    num, den = body + tails
    h = num / den
    if not (np.isfinite(h) and h > 0):
        raise InformationError(f"relevant-subset information is not positive: {h}")
    return float(h)


def invariant_info(h, mu):
    """Information rescaled by the elemental information, ``g = h / mu``."""
    if mu <= 0:
        raise InformationError("mu must be positive")
    return np.asarray(h, dtype=float) / mu


def uv_statistics(g, w, n):
    g = np.asarray(g, dtype=float)
    w = np.asarray(w, dtype=float)
    if g.shape != w.shape:
        raise InformationError(f"g has shape {g.shape} but w has shape {w.shape}")
    if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
        raise InformationError("weights must be positive and sum to one")
    total = g.sum()
    u = g - w * total
    v = w * (total - n)
    return u, v


def fisher_matrix(design, model, *, return_flag=False):
    """``F = n mu sum_i w_i f(x_i) f(x_i)^T`` for a linear predictor."""
    rows = design.basis_rows
    M = rows.T @ (np.asarray(design.weights)[:, None] * rows)
    F = design.n * elemental_info(model) * M
    if return_flag:
        return F, bool(np.linalg.cond(F) > SINGULAR_COND)
    return F


def relevant_info_matrix(h, basis_rows):
    """``H = sum_i h_i f(x_i) f(x_i)^T``."""
    h = np.asarray(h, dtype=float)
    rows = np.asarray(basis_rows, dtype=float)
    if rows.shape[0] != h.size:
        raise InformationError(f"{h.size} information values for {rows.shape[0]} support points")
    if np.any(h < 0):
        raise InformationError("information values must be non-negative")
    H = rows.T @ (h[:, None] * rows)
    return 0.5 * (H + H.T)


def gap_matrix(design, c):
    """The d x d weight matrix ``D_ij = r_i r_j s_ij`` of the RSLB-CRLB gap."""
    rows = design.basis_rows
    M = rows.T @ (np.asarray(design.weights)[:, None] * rows)
    try:
        Minv = np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise InformationError("normalized information matrix is singular") from exc
    r = rows @ Minv @ np.asarray(c, dtype=float)
    S = rows @ Minv @ rows.T
    return np.outer(r, r) * S


def asymptotic_gap(design, model, c, var_u, var_v):
    """Second-order gap ``n^2 c'(E[H^-1] - F^-1)c`` implied by Var[u] and Var[v].

    Returns ``tr(D (var_u + var_v)) / (n mu)``.
    """
    D = gap_matrix(design, c)
    total = np.asarray(var_u, dtype=float) + np.asarray(var_v, dtype=float)
    return float(np.trace(D @ total) / (design.n * elemental_info(model)))


def q_statistic(model, residual):
    """Standardized, score-adjusted information of single observations."""
    table = moment_table(model)
    gamma = table.gamma_alt
    if gamma == 0:
        raise InformationError("q statistic is undefined when the information is constant")
    e = np.asarray(residual, dtype=float)
    mu = table.mu
    return (_info(model, e) / mu - 1.0 - table.nu_11 * _score(model, e) / mu) / gamma


def summarize(model, groups, design):
    """Per-group and matrix summaries for the groups observed under ``design``."""
    h = np.array([relevant_info_eta(model, grp) for grp in groups])
    g = invariant_info(h, elemental_info(model))
    u, v = uv_statistics(g, design.weights, sum(len(grp) for grp in groups))
    return InfoSummary(
        eta_hat=np.array([grp.eta_hat for grp in groups], dtype=float),
        h=h, g=g, u=u, v=v,
        H=relevant_info_matrix(h, design.basis_rows),
        F=fisher_matrix(design, model),
    )
