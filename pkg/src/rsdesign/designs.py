"""A priori designs, optimality criteria and the Cramer-Rao bound.

Support points are stored as rows of ``support`` (shape ``(d, s)``) and the
linear predictor is ``eta(x) = f(x) @ theta`` with ``f`` a named
:class:`Basis`.  Support indices are zero based throughout the package.
"""

from dataclasses import dataclass, field
import itertools

import numpy as np
from scipy import linalg

from .information import fisher_matrix


class DesignError(ValueError):
    pass


class SingularDesignError(DesignError, np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Basis:
    """Regression functions ``f(x)`` of a linear predictor.

    ``domain`` is the box the G-criterion maximizes over, one ``(lo, hi)``
    pair per coordinate of ``x``.
    """

    name: str
    domain: tuple

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.name == "identity":
            return x.copy()
        if self.name == "interaction":
            x1, x2 = x[:, 0], x[:, 1]
            return np.column_stack([np.ones_like(x1), x1, x2, x1 * x2])
        if self.name.startswith("poly"):
            degree = int(self.name[4:])
            return np.vander(x[:, 0], degree + 1, increasing=True)
        raise DesignError(f"unknown basis {self.name!r}")

    @property
    def dim(self):
        return len(self.domain)


def get_basis(name, domain=None):
    """Look up a basis by name: ``identity``, ``interaction``, ``quadratic`` or ``polyK``."""
    if name == "quadratic":
        name = "poly2"
    defaults = {"identity": ((0.0, 1.0), (0.0, 1.0)), "interaction": ((0.0, 1.0), (0.0, 1.0))}
    if name in defaults:
        dom = defaults[name]
    elif name.startswith("poly") and name[4:].isdigit():
        dom = ((-1.0, 1.0),)
    else:
        raise DesignError(f"unknown basis {name!r}")
    if domain is not None:
        dom = tuple(tuple(map(float, pair)) for pair in domain)
    return Basis(name, dom)


@dataclass(frozen=True, eq=False)
class Design:
    """An n-point a priori deterministic design."""

    support: np.ndarray
    weights: np.ndarray
    n: int
    basis: Basis = field(default_factory=lambda: get_basis("identity"))

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.support, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if X.shape[0] == 1 and w.size > 1 and self.basis.dim == 1:
            X = X.T
        object.__setattr__(self, "support", X)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "n", int(self.n))
        if X.shape[0] < 1 or X.shape[0] != w.size:
            raise DesignError(f"{X.shape[0]} support points but {w.size} weights")
        if np.any(w < 0) or np.any(w > 1) or abs(w.sum() - 1) > 1e-9:
            raise DesignError(f"weights must lie in [0, 1] and sum to 1 (got {w})")
        if np.unique(X, axis=0).shape[0] != X.shape[0]:
            raise DesignError("support points must be distinct")
        if self.n < 1:
            raise DesignError("n must be positive")

    @property
    def d(self):
        return self.support.shape[0]

    @property
    def p(self):
        return self.basis_rows.shape[1]

    @property
    def basis_rows(self):
        return self.basis(self.support)

    @property
    def counts(self):
        """Exact allocations ``n w_i``, or ``None`` when they are not integers."""
        nw = self.n * self.weights
        rounded = np.rint(nw)
        if np.allclose(nw, rounded, atol=1e-9):
            return rounded.astype(int)
        return None

    def with_weights(self, weights, n=None):
        return Design(self.support, weights, self.n if n is None else n, self.basis)

    def to_dict(self):
        return {
            "support": self.support.tolist(),
            "weights": self.weights.tolist(),
            "n": self.n,
            "basis": self.basis.name,
            "domain": [list(pair) for pair in self.basis.domain],
        }

    @classmethod
    def from_dict(cls, spec):
        basis = get_basis(spec.get("basis", "identity"), spec.get("domain"))
        return cls(np.asarray(spec["support"], dtype=float), spec["weights"], spec["n"], basis)

    def __eq__(self, other):
        return (isinstance(other, Design) and self.n == other.n and self.basis == other.basis
                and np.array_equal(self.support, other.support)
                and np.allclose(self.weights, other.weights, rtol=0, atol=1e-12))

    def __repr__(self):
        return f"Design(d={self.d}, n={self.n}, weights={np.round(self.weights, 4).tolist()})"


@dataclass(frozen=True)
class RandomDesign:
    """A data-independent distribution over deterministic designs."""

    atoms: tuple
    probabilities: tuple

    def __post_init__(self):
        atoms = tuple(self.atoms)
        probs = np.asarray(self.probabilities, dtype=float)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probabilities", tuple(probs.tolist()))
        if len(atoms) != probs.size or not atoms:
            raise DesignError("need one probability per atom")
        if np.any(probs <= 0) or np.any(probs > 1) or abs(probs.sum() - 1) > 1e-9:
            raise DesignError("atom probabilities must lie in (0, 1] and sum to 1")
        first = atoms[0]
        for atom in atoms[1:]:
            if atom.n != first.n or not np.array_equal(atom.support, first.support):
                raise DesignError("all atoms must share the support and n")

    @classmethod
    def point_mass(cls, design):
        return cls((design,), (1.0,))

    @property
    def n(self):
        return self.atoms[0].n

    def to_dict(self):
        return {"atoms": [a.to_dict() for a in self.atoms], "probabilities": list(self.probabilities)}

    @classmethod
    def from_dict(cls, spec):
        return cls(tuple(Design.from_dict(a) for a in spec["atoms"]), spec["probabilities"])


@dataclass(frozen=True)
class Criterion:
    kind: str
    g_grid: int = 1001

    def __post_init__(self):
        object.__setattr__(self, "kind", self.kind.upper())
        if self.kind not in ("D", "A", "G"):
            raise DesignError(f"unknown criterion {self.kind!r}")
        if self.g_grid < 2:
            raise DesignError("g_grid must be at least 2")


def crlb(design, model):
    """Inverse Fisher information, via a Cholesky solve."""
    F = fisher_matrix(design, model)
    return spd_inverse(F)


def spd_inverse(A):
    A = 0.5 * (A + A.T)
    try:
        c = linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularDesignError("matrix is singular or not positive definite") from exc
    if np.linalg.cond(A) > 1e12:
        raise SingularDesignError("matrix is numerically singular")
    inv = linalg.cho_solve(c, np.eye(A.shape[0]))
    return 0.5 * (inv + inv.T)


def _domain_grid(basis, points):
    axes = [np.linspace(lo, hi, points) for lo, hi in basis.domain]
    mesh = np.meshgrid(*axes, indexing="ij")
    return basis(np.column_stack([m.ravel() for m in mesh]))


def criterion_value(matrix, criterion, basis=None, *, scale="information"):
    """Evaluate an optimality criterion.

    With ``scale="information"`` the matrix is an information matrix ``F``:
    D gives ``det(F)**(-1/p)``, A gives ``tr(F^-1)`` and G gives
    ``max_x f(x)' F^-1 f(x)`` over a uniform grid of the basis domain.  With
    ``scale="covariance"`` the matrix is already a covariance ``V`` standing
    in for ``F^-1``.  Smaller is better in both cases.
    """
    if isinstance(criterion, str):
        criterion = Criterion(criterion)
    A = np.asarray(matrix, dtype=float)
    if not np.allclose(A, A.T, rtol=1e-8, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise DesignError("criterion input must be symmetric")
    A = 0.5 * (A + A.T)
    eig = np.linalg.eigvalsh(A)
    if eig.min() < -1e-10 * max(1.0, eig.max()):
        raise DesignError("criterion input must be positive semi-definite")
    p = A.shape[0]
    if scale == "information":
        if criterion.kind == "D":
            sign, logdet = np.linalg.slogdet(A)
            if sign <= 0:
                raise SingularDesignError("D-criterion needs a nonsingular matrix")
            return float(np.exp(-logdet / p))
        V = spd_inverse(A)
    elif scale == "covariance":
        if criterion.kind == "D":
            sign, logdet = np.linalg.slogdet(A)
            if sign <= 0:
                raise SingularDesignError("D-criterion needs a nonsingular matrix")
            return float(np.exp(logdet / p))
        V = A
    else:
        raise ValueError(f"unknown scale {scale!r}")
    if criterion.kind == "A":
        return float(np.trace(V))
    if basis is None:
        raise DesignError("the G-criterion needs a basis with a domain")
    rows = _domain_grid(basis, criterion.g_grid)
    return float(np.max(np.einsum("ij,jk,ik->i", rows, V, rows)))


def optimal_weights(basis_rows, kind, *, tol=1e-8, max_iter=100000):
    """Approximate optimal weights on a fixed support (multiplicative algorithm).

    G uses the D-optimal weights: by the Kiefer-Wolfowitz equivalence theorem
    they coincide whenever the support carries the D-optimal design.
    """
    F = np.asarray(basis_rows, dtype=float)
    d, p = F.shape
    kind = kind.upper()
    w = np.full(d, 1.0 / d)
    for _ in range(max_iter):
        Minv = np.linalg.inv(F.T @ (w[:, None] * F))
        if kind in ("D", "G"):
            sens = np.einsum("ij,jk,ik->i", F, Minv, F) / p
        elif kind == "A":
            M2 = Minv @ Minv
            sens = np.sqrt(np.einsum("ij,jk,ik->i", F, M2, F))
            sens = sens / np.dot(w, sens)
        else:
            raise DesignError(f"unknown criterion {kind!r}")
        new = w * sens
        new /= new.sum()
        if np.max(np.abs(new - w)) < tol * 1e-3:
            return new
        w = new
    return w


def reference_crlb(design, model, criterion):
    """CRLB of the criterion-optimal approximate design on ``design``'s support."""
    kind = criterion.kind if isinstance(criterion, Criterion) else criterion
    w = optimal_weights(design.basis_rows, kind)
    return crlb(design.with_weights(w), model)


def _quadratic_design(counts):
    counts = np.asarray(counts, dtype=float)
    n = int(counts.sum())
    return Design(np.array([[-1.0], [0.0], [1.0]]), counts / n, n, get_basis("quadratic"))


def _minimax_counts(n):
    k, rem = divmod(n, 3)
    if rem == 0:
        return [(k, k, k)]
    if rem == 1:
        return [(k + 1, k, k), (k, k + 1, k), (k, k, k + 1)]
    return [(k + 1, k + 1, k), (k + 1, k, k + 1), (k, k + 1, k + 1)]


def builtin_design(name, n):
    """Named deterministic designs.

    ``balanced2``
        Two treatments ``x1 = (1, 1)``, ``x2 = (1, 0)`` with equal weight.
    ``factorial22``
        The 2x2 factorial on ``[0, 1]^2`` with interaction basis.
    ``g_optimal_quadratic``
        Quadratic regression on ``{-1, 0, 1}``; equal thirds when ``3 | n``,
        otherwise the leftover observations go to the lowest points.
    """
    n = int(n)
    if name == "balanced2":
        if n < 2:
            raise DesignError("balanced2 needs n >= 2")
        return Design(np.array([[1.0, 1.0], [1.0, 0.0]]), [0.5, 0.5], n, get_basis("identity"))
    if name == "factorial22":
        if n < 4:
            raise DesignError("factorial22 needs n >= 4")
        support = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        return Design(support, [0.25] * 4, n, get_basis("interaction"))
    if name == "g_optimal_quadratic":
        if n < 3:
            raise DesignError("g_optimal_quadratic needs n >= 3")
        return _quadratic_design(_minimax_counts(n)[0])
    raise DesignError(f"unknown builtin design {name!r}")


def builtin_random_design(name, n):
    """Randomized counterpart of :func:`builtin_design`.

    For ``g_optimal_quadratic`` with ``n`` not divisible by three the leftover
    observations are placed uniformly at random, one atom per placement.
    Other designs are returned as point masses.
    """
    if name != "g_optimal_quadratic" or int(n) % 3 == 0:
        return RandomDesign.point_mass(builtin_design(name, n))
    if int(n) < 3:
        raise DesignError("g_optimal_quadratic needs n >= 3")
    atoms = tuple(_quadratic_design(c) for c in _minimax_counts(int(n)))
    return RandomDesign(atoms, (1 / 3, 1 / 3, 1 / 3))


def sample_design(design, rng):
    """Draw one deterministic design; deterministic inputs pass through."""
    if isinstance(design, Design):
        return design
    if len(design.atoms) == 1:
        return design.atoms[0]
    k = rng.choice(len(design.atoms), p=np.asarray(design.probabilities))
    return design.atoms[int(k)]


def simplex_grid(d, step):
    """All weight vectors on a regular simplex lattice with the given step."""
    m = int(round(1 / step))
    for combo in itertools.product(range(m + 1), repeat=d - 1):
        if sum(combo) <= m:
            yield np.array(list(combo) + [m - sum(combo)], dtype=float) / m
