"""Central finite-difference check of the score and observed information."""

import numpy as np

from rsdesign.error_models import ErrorModel, log_density, observed_info, score

FD_STEP = 1e-5
FD_TOL = 1e-6
FD_MODELS = [ErrorModel.gnd(2.0), ErrorModel.gnd(3.5, 2.0), ErrorModel.gnd(4.0),
             ErrorModel.gnd(10.0), ErrorModel.cauchy(1.0), ErrorModel.cauchy(0.7)]


def fd_grid(model):
    return np.linspace(-5.0, 5.0, 101) * model.scale


def fd_scale(model, values):
    """Tolerance scale for the comparison.

    Central differences at a fixed step have truncation error of order
    ``step**2 * |l'''| / 6``.  For light tails with a large shape (``zeta > 4``)
    this exceeds the absolute tolerance far from the centre, so the tolerance
    there is taken relative to the size of the derivative.
    """
    if model.family.value == "gnd" and model.zeta > 4:
        return np.maximum(1.0, np.abs(values))
    return np.ones_like(values)


def fd_discrepancies(model, step=FD_STEP):
    """Largest scaled score and observed-information discrepancies on the grid."""
    e = fd_grid(model)
    s = score(model, e)
    i = observed_info(model, e)
    fd_s = -(log_density(model, e + step) - log_density(model, e - step)) / (2 * step)
    fd_i = (score(model, e + step) - score(model, e - step)) / (2 * step)
    return (float(np.max(np.abs(s - fd_s) / fd_scale(model, s))),
            float(np.max(np.abs(i - fd_i) / fd_scale(model, i))))
