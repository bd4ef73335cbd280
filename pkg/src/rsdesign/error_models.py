"""Location-family error laws and their per-observation information.

Three families are supported:

* ``gnd`` -- generalized normal, density proportional to
  ``exp(-|e/tau|**zeta / zeta)``.  ``zeta = 2`` is the standard normal
  scaled by ``tau``.
* ``cauchy`` -- density proportional to ``1 / (1 + (e/tau)**2)``.
* ``hetero_normal_gamma`` -- each observation carries its own precision
  ``a ~ Gamma(alpha, rate=beta)`` and is normal with variance ``1/a``
  given that precision.  The precision is observed and plays the role of the
  ancillary.

All derivative functions take the residual ``e = y - eta`` and return
derivatives with respect to ``eta``.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special


class Family(str, enum.Enum):
    GND = "gnd"
    CAUCHY = "cauchy"
    HETERO_NORMAL_GAMMA = "hetero_normal_gamma"


class ModelError(ValueError):
    """Invalid error-model parameters or an unsupported operation."""


@dataclass(frozen=True)
class MomentTable:
    """Moments of the per-observation score and information.

    ``nu`` maps ``(k, l)`` to ``E[score**k * (dscore + E[score**2])**l]``.
    ``gamma`` follows the closed-form coefficient built from ``nu``;
    ``gamma_alt`` is the standard deviation of ``info / mu`` computed
    directly.  For symmetric laws the two agree.
    """

    mu: float
    gamma: float
    gamma_alt: float
    nu: dict = field(default_factory=dict)

    @property
    def nu_20(self):
        return self.nu[(2, 0)]

    @property
    def nu_02(self):
        return self.nu[(0, 2)]

    @property
    def nu_11(self):
        return self.nu[(1, 1)]


@dataclass(frozen=True)
class ErrorModel:
    family: Family
    zeta: float = None
    tau: float = None
    alpha: float = None
    beta: float = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family is Family.GND:
            _require_positive(tau=self.tau, zeta=self.zeta)
            if self.zeta < 2:
                raise ModelError(
                    f"zeta must be >= 2 for the generalized normal (got {self.zeta});"
                    " smaller shapes have an unbounded observed information"
                )
        elif self.family is Family.CAUCHY:
            _require_positive(tau=self.tau)
        else:
            _require_positive(alpha=self.alpha, beta=self.beta)

    @classmethod
    def gnd(cls, zeta, tau=1.0):
        return cls(Family.GND, zeta=float(zeta), tau=float(tau))

    @classmethod
    def cauchy(cls, tau=1.0):
        return cls(Family.CAUCHY, tau=float(tau))

    @classmethod
    def hetero_normal_gamma(cls, alpha, beta):
        return cls(Family.HETERO_NORMAL_GAMMA, alpha=float(alpha), beta=float(beta))

    @classmethod
    def from_dict(cls, spec):
        spec = dict(spec)
        family = Family(spec.pop("family"))
        if family is Family.GND:
            return cls.gnd(spec["zeta"], spec.get("tau", 1.0))
        if family is Family.CAUCHY:
            return cls.cauchy(spec.get("tau", 1.0))
        return cls.hetero_normal_gamma(spec["alpha"], spec["beta"])

    def to_dict(self):
        if self.family is Family.GND:
            return {"family": "gnd", "zeta": self.zeta, "tau": self.tau}
        if self.family is Family.CAUCHY:
            return {"family": "cauchy", "tau": self.tau}
        return {"family": "hetero_normal_gamma", "alpha": self.alpha, "beta": self.beta}

    @property
    def is_location(self):
        return self.family is not Family.HETERO_NORMAL_GAMMA

    @property
    def scale(self):
        """Natural length scale of the residuals."""
        if self.is_location:
            return self.tau
        return math.sqrt(self.beta / self.alpha)

    def __reduce__(self):
        # keep pickles small and drop cached quadrature results
        return (ErrorModel, (self.family, self.zeta, self.tau, self.alpha, self.beta))

    @property
    def log_norm(self):
        """Log of the normalizing constant of the location density."""
        cached = self.__dict__.get("_log_norm")
        if cached is None:
            if self.family is Family.GND:
                z = self.zeta
                cached = math.log(2 * self.tau) + (1 / z - 1) * math.log(z) + special.gammaln(1 / z)
            elif self.family is Family.CAUCHY:
                cached = math.log(math.pi * self.tau)
            else:
                raise ModelError("the hetero_normal_gamma model has no location density;"
                                 " use log_density_weighted")
            object.__setattr__(self, "_log_norm", cached)
        return cached


def _require_positive(**params):
    for name, value in params.items():
        if value is None or not np.isfinite(value) or value <= 0:
            raise ModelError(f"{name} must be a positive finite number (got {value!r})")


def _check_finite(residual):
    e = np.asarray(residual, dtype=float)
    if not np.all(np.isfinite(e)):
        raise ValueError("residuals must be finite")
    return e


def _require_location(model, what):
    if not model.is_location:
        raise ModelError(f"{what} needs a location family; the hetero_normal_gamma model"
                         " is handled through its observed precisions")


# Unchecked vectorized kernels; the hot loops in ``information`` and
# ``estimation`` call these directly.

def _loglik(model, e):
    """Log density without the normalizing constant."""
    if model.family is Family.CAUCHY:
        return -np.log1p((e / model.tau) ** 2)
    z = model.zeta
    return -np.abs(e / model.tau) ** z / z


def _score(model, e):
    t = model.tau
    if model.family is Family.CAUCHY:
        return 2.0 * e / (t * t + e * e)
    z = model.zeta
    if z == 2.0:
        return e / (t * t)
    s = e / t
    return np.sign(s) * np.abs(s) ** (z - 1) / t


def _info(model, e):
    t = model.tau
    if model.family is Family.CAUCHY:
        e2 = e * e
        return 2.0 * (t * t - e2) / (t * t + e2) ** 2
    z = model.zeta
    if z == 2.0:
        return np.full(np.shape(e), 1.0 / (t * t))
    return (z - 1) * np.abs(e / t) ** (z - 2) / (t * t)


def log_density(model, residual):
    """Normalized log density ``log f(e | 0)``."""
    _require_location(model, "log_density")
    e = _check_finite(residual)
    return _loglik(model, e) - model.log_norm


def log_density_weighted(model, residual, precision):
    """Normal log density with variance ``1/precision`` (hetero_normal_gamma)."""
    e = _check_finite(residual)
    a = np.asarray(precision, dtype=float)
    return 0.5 * (np.log(a) - math.log(2 * math.pi)) - 0.5 * a * e * e


def score(model, residual):
    """Derivative of the log likelihood with respect to the location."""
    _require_location(model, "score")
    return _score(model, _check_finite(residual))


def observed_info(model, residual):
    """Negative second derivative of the log likelihood in the location.

    For the Cauchy this is negative when ``|e| > tau``.
    """
    _require_location(model, "observed_info")
    return _info(model, _check_finite(residual))


def _expect(model, func, rtol=1e-11):
    """E[func(e)] under the model's own residual law."""
    t = model.tau
    if model.family is Family.CAUCHY:
        # e = tau * tan(phi) turns the Cauchy law into Uniform(-pi/2, pi/2)
        def integrand(phi):
            return func(t * math.tan(phi)) / math.pi
        lo, hi = -math.pi / 2, math.pi / 2
        val, err = 0.0, 0.0
        for a, b in ((lo, 0.0), (0.0, hi)):
            v, e, *rest = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=rtol,
                                         limit=400, full_output=1)
            if len(rest) > 1:
                raise ArithmeticError(f"quadrature failed: {rest[1]}")
            val += v
            err += e
        return val
    log_norm = model.log_norm

    def integrand(e):
        return func(e) * math.exp(float(_loglik(model, e)) - log_norm)
    val = 0.0
    for a, b in ((-50 * t, 0.0), (0.0, 50 * t)):
        v, e, *rest = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=rtol,
                                     limit=400, full_output=1)
        if len(rest) > 1:
            raise ArithmeticError(f"quadrature failed: {rest[1]}")
        val += v
    return val


def elemental_info(model):
    """Expected information of one observation, ``mu = E[i]``."""
    cached = model.__dict__.get("_mu")
    if cached is not None:
        return cached
    if model.family is Family.HETERO_NORMAL_GAMMA:
        mu = model.alpha / model.beta
    elif model.family is Family.GND:
        z = model.zeta
        mu = math.exp((2 - 2 / z) * math.log(z) + special.gammaln(2 - 1 / z)
                      - special.gammaln(1 / z)) / model.tau ** 2
    else:
        mu = 1.0 / (2.0 * model.tau ** 2)
    if not (np.isfinite(mu) and mu > 0):
        raise ArithmeticError(f"elemental information is not positive: {mu}")
    object.__setattr__(model, "_mu", mu)
    return mu


def moment_table(model):
    cached = model.__dict__.get("_moments")
    if cached is not None:
        return cached
    mu = elemental_info(model)
    if model.family is Family.HETERO_NORMAL_GAMMA:
        # score = a e, dscore = -a, with e | a ~ N(0, 1/a)
        nu20 = mu
        nu02 = model.alpha / model.beta ** 2
        nu11 = 0.0
        gamma_alt2 = 1.0 / model.alpha
    else:
        nu20 = _expect(model, lambda e: float(_score(model, e)) ** 2)
        nu02 = _expect(model, lambda e: (nu20 - float(_info(model, e))) ** 2)
        nu11 = _expect(model, lambda e: float(_score(model, e)) * (nu20 - float(_info(model, e))))
        second = _expect(model, lambda e: float(_info(model, e)) ** 2)
        gamma_alt2 = max(second / mu ** 2 - 1.0, 0.0)
    inner = (nu02 * nu20 - nu11) / nu20 ** 3
    table = MomentTable(
        mu=mu,
        gamma=math.sqrt(inner) if inner >= 0 else float("nan"),
        gamma_alt=math.sqrt(gamma_alt2),
        nu={(2, 0): nu20, (0, 2): nu02, (1, 1): nu11},
    )
    object.__setattr__(model, "_moments", table)
    return table


def sample(model, rng, size=None):
    """Draw residuals from the model.

    Returns residuals for location families and a ``(precision, residual)``
    pair for ``hetero_normal_gamma``.
    """
    if model.family is Family.CAUCHY:
        return model.tau * np.tan(np.pi * (rng.random(size) - 0.5))
    if model.family is Family.GND:
        z = model.zeta
        # |e/tau|**zeta / zeta ~ Gamma(1/zeta, 1)
        g = rng.standard_gamma(1.0 / z, size)
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return sign * model.tau * (z * g) ** (1.0 / z)
    a = rng.gamma(model.alpha, 1.0 / model.beta, size)
    return a, rng.standard_normal(size) / np.sqrt(a)
