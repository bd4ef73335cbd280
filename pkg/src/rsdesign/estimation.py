"""Maximum-likelihood estimation of locations and linear-predictor coefficients."""

from dataclasses import dataclass

import numpy as np

from .error_models import Family, _info, _loglik, _score

GRID_POINTS = 512
MAX_NEWTON = 200


class ConvergenceError(ArithmeticError):
    pass


@dataclass
class FitResult:
    theta_hat: np.ndarray
    eta_hat: np.ndarray
    iterations: int
    converged: bool
    final_gradient_norm: float


def _group_loglik(model, y, eta):
    return _loglik(model, y[:, None] - np.atleast_1d(eta)[None, :]).sum(axis=0)


def _polish(model, y, x, lo, hi, tol):
    """Safeguarded Newton for the stationary point near ``x``.

    Keeps a bracket ``[lo, hi]`` with a positive score at ``lo`` and a
    negative score at ``hi`` whenever the grid supplied one, and falls back to
    bisection when Newton leaves it or fails to halve it every two steps.
    Light-tailed likelihoods are very flat at the top (for ``zeta = 10`` the
    score behaves like ``(eta - eta_hat)**9``), so convergence requires a
    negligible Newton step as well as a small score.
    """
    s_lo = _score(model, y - lo).sum()
    s_hi = _score(model, y - hi).sum()
    bracketed = s_lo > 0 > s_hi
    widths = [hi - lo] * 2
    xtol = 1e-13
    for it in range(1, MAX_NEWTON + 1):
        r = y - x
        s = _score(model, r).sum()
        info = _info(model, r).sum()
        step = s / info if info > 0 else None
        if s == 0 or (abs(s) <= tol and step is not None
                      and abs(step) <= xtol * max(1.0, abs(x))):
            return x, s, it
        if bracketed:
            if s > 0:
                lo = x
            else:
                hi = x
            slow = hi - lo > 0.5 * widths[-2]
            widths.append(hi - lo)
            if step is None or slow or not (lo < x + step < hi):
                x_new = 0.5 * (lo + hi)
            else:
                x_new = x + step
            if hi - lo <= 4e-16 * max(1.0, abs(x)):
                return x_new, _score(model, y - x_new).sum(), it
        else:
            # unbracketed: Newton with backtracking on the log likelihood
            if step is None:
                step = np.sign(s) * (hi - lo)
            l0 = _loglik(model, r).sum()
            for _ in range(60):
                if _loglik(model, y - (x + step)).sum() >= l0:
                    break
                step *= 0.5
            x_new = x + step
            if abs(step) <= 1e-15 * max(1.0, abs(x)):
                return x_new, _score(model, y - x_new).sum(), it
        x = x_new
    raise ConvergenceError(f"location MLE did not converge in {MAX_NEWTON} steps")


def mle_location(model, responses, *, return_details=False):
    """Global maximizer of the group log likelihood.

    A 512-point grid over ``[min(y) - tau, max(y) + tau]`` seeds a safeguarded
    Newton polish from the three best grid local maxima; the best polished
    stationary point wins.
    """
    y = np.asarray(responses, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("need at least one response")
    if model.family is Family.HETERO_NORMAL_GAMMA:
        raise ValueError("use weighted_location for the hetero_normal_gamma model")
    tol = 1e-10 * (1 + y.size)
    if y.size == 1:
        out = (float(y[0]), 0.0, 0)
        return out if return_details else out[0]
    if model.family is Family.GND and model.zeta == 2.0:
        m = float(y.mean())
        out = (m, float(_score(model, y - m).sum()), 0)
        return out if return_details else m
    lo, hi = y.min() - model.tau, y.max() + model.tau
    grid = np.linspace(lo, hi, GRID_POINTS)
    ll = _group_loglik(model, y, grid)
    padded = np.concatenate([[-np.inf], ll, [-np.inf]])
    peaks = np.flatnonzero((padded[1:-1] >= padded[:-2]) & (padded[1:-1] >= padded[2:]))
    peaks = peaks[np.argsort(-ll[peaks], kind="stable")][:3]
    best = None
    for k in peaks:
        a = grid[max(k - 1, 0)]
        b = grid[min(k + 1, GRID_POINTS - 1)]
        x, s, it = _polish(model, y, grid[k], a, b, tol)
        val = _group_loglik(model, y, x)[0]
        if best is None or val > best[0]:
            best = (val, float(x), float(s), it)
    _, x, s, it = best
    if abs(s) > 1e-8 * (1 + y.size):
        raise ConvergenceError(f"location MLE is not stationary (score {s:.3g})")
    return (x, s, it) if return_details else x


def weighted_location(responses, precisions):
    y = np.asarray(responses, dtype=float)
    a = np.asarray(precisions, dtype=float)
    return float(np.dot(a, y) / a.sum())


def mle_theta(model, basis_rows, responses, precisions=None, *, tol=None):
    """MLE of the coefficients of a linear predictor ``eta = basis_rows @ theta``.

    ``basis_rows`` holds one row per observation.  Saturated designs (as many
    distinct rows as parameters) are fitted group by group and mapped back
    exactly; other designs use Newton's method on the full likelihood seeded
    at the (weighted) least-squares solution.
    """
    X = np.atleast_2d(np.asarray(basis_rows, dtype=float))
    y = np.asarray(responses, dtype=float).ravel()
    n, p = X.shape
    if y.size != n:
        raise ValueError(f"{n} basis rows but {y.size} responses")
    if np.linalg.matrix_rank(X) < p:
        raise np.linalg.LinAlgError("basis matrix is rank deficient over the observed allocations")
    tol = 1e-8 * (1 + n) if tol is None else tol
    if model.family is Family.HETERO_NORMAL_GAMMA:
        if precisions is None:
            raise ValueError("hetero_normal_gamma fits need the observed precisions")
        a = np.asarray(precisions, dtype=float).ravel()
        H = X.T @ (a[:, None] * X)
        theta = np.linalg.solve(H, X.T @ (a * y))
        grad = X.T @ (a * (y - X @ theta))
        return FitResult(theta, X @ theta, 0, True, float(np.linalg.norm(grad)))

    support, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    if support.shape[0] == p:
        eta = np.array([mle_location(model, y[inverse == i]) for i in range(p)])
        theta = np.linalg.solve(support, eta)
        grad = X.T @ _score(model, y - X @ theta)
        return FitResult(theta, support @ theta, 0, True, float(np.linalg.norm(grad)))

    theta = np.linalg.lstsq(X, y, rcond=None)[0]
    converged = False
    for it in range(1, MAX_NEWTON + 1):
        r = y - X @ theta
        grad = X.T @ _score(model, r)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            converged = True
            break
        info = X.T @ (_info(model, r)[:, None] * X)
        try:
            step = np.linalg.solve(info, grad)
            if grad @ step <= 0:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = grad / max(np.abs(np.diag(info)).max(), 1e-12)
        l0 = _loglik(model, r).sum()
        for _ in range(60):
            if _loglik(model, y - X @ (theta + step)).sum() >= l0:
                break
            step = step * 0.5
        theta = theta + step
    else:
        it = MAX_NEWTON
        gnorm = float(np.linalg.norm(X.T @ _score(model, y - X @ theta)))
    if not converged:
        raise ConvergenceError(f"coefficient MLE did not converge (gradient norm {gnorm:.3g})")
    return FitResult(theta, support @ theta, it, True, gnorm)
