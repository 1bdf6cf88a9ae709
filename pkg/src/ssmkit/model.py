"""Second-order mechanical models and their first-order phase-space form.

The equations of motion are ``M y'' + C y' + K y + f(y, y') = 0`` with a
polynomial force ``f`` of degree at least two.  Stacking ``x = (y, y')``
gives ``x' = A x + F(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import AsymmetryError, ConfigError, DimensionMismatch, SingularMass
from .poly import PolyMap

__all__ = [
    "ForceTerm",
    "PolynomialForce",
    "MechanicalSystem",
    "FirstOrderSystem",
    "build_first_order",
    "make_shaw_pierre",
]

SYM_TOL = 1e-12


@dataclass(frozen=True)
class ForceTerm:
    """One monomial ``coefficient * prod(x_k ** exponents[k])`` acting on ``dof``.

    ``dof`` is zero-based.  ``exponents`` runs over the ``2n`` variables
    ``(y_1..y_n, y'_1..y'_n)``.
    """

    dof: int
    coefficient: float
    exponents: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(int(e) for e in self.exponents))
        if any(e < 0 for e in self.exponents):
            raise ConfigError("force exponents must be non-negative")
        if sum(self.exponents) < 2:
            raise ConfigError(
                f"nonlinear force term {self.exponents} has degree {sum(self.exponents)} < 2"
            )

    @property
    def degree(self) -> int:
        return sum(self.exponents)


@dataclass(frozen=True)
class PolynomialForce:
    """Polynomial nonlinearity ``f(y, y')`` as a list of :class:`ForceTerm`."""

    n: int
    terms: tuple[ForceTerm, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if len(t.exponents) != 2 * self.n:
                raise DimensionMismatch(
                    f"force term exponents have length {len(t.exponents)}, expected {2 * self.n}"
                )
            if not 0 <= t.dof < self.n:
                raise DimensionMismatch(f"force term targets dof {t.dof} outside 0..{self.n - 1}")

    @property
    def degree(self) -> int:
        return max((t.degree for t in self.terms), default=0)

    def as_polymap(self) -> PolyMap:
        """The force as a map ``R^{2n} -> R^n``."""
        return PolyMap.from_terms(
            2 * self.n, self.n, [(t.dof, t.exponents, t.coefficient) for t in self.terms]
        )

    def __len__(self):
        return len(self.terms)


def _check_symmetric(name, mat):
    scale = np.linalg.norm(mat)
    if np.linalg.norm(mat - mat.T) > SYM_TOL * max(scale, np.finfo(float).tiny):
        raise AsymmetryError(f"{name} is not symmetric")


@dataclass(frozen=True, eq=False)
class MechanicalSystem:
    """``M y'' + C y' + K y + f(y, y') = 0``.

    Parameters
    ----------
    M, C, K : (n, n) array_like
        Mass, damping and stiffness matrices.  All must be symmetric; ``M``
        must be positive definite.
    nonlinearity : PolynomialForce or sequence of ForceTerm, optional
    """

    M: np.ndarray
    C: np.ndarray
    K: np.ndarray
    nonlinearity: PolynomialForce = None
    name: str = ""
    _force_map: PolyMap = field(default=None, init=False, repr=False)

    def __post_init__(self):
        mats = {}
        for key in ("M", "C", "K"):
            mat = np.array(getattr(self, key), dtype=float)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise DimensionMismatch(f"{key} must be a square matrix")
            if not np.all(np.isfinite(mat)):
                raise ConfigError(f"{key} has non-finite entries")
            mat.setflags(write=False)
            mats[key] = mat
        n = mats["M"].shape[0]
        if mats["C"].shape != (n, n) or mats["K"].shape != (n, n):
            raise DimensionMismatch("M, C and K must share their shape")
        for key, mat in mats.items():
            object.__setattr__(self, key, mat)
        nl = self.nonlinearity
        if nl is None:
            nl = PolynomialForce(n)
        elif not isinstance(nl, PolynomialForce):
            nl = PolynomialForce(n, tuple(nl))
        if nl.n != n:
            raise DimensionMismatch("nonlinearity is defined for another dof count")
        object.__setattr__(self, "nonlinearity", nl)
        object.__setattr__(self, "_force_map", nl.as_polymap())

    @property
    def n(self) -> int:
        return self.M.shape[0]

    def validate(self):
        """Check symmetry of ``M, C, K`` and positive definiteness of ``M``."""
        for key in ("M", "C", "K"):
            _check_symmetric(key, getattr(self, key))
        eig = np.linalg.eigvalsh(0.5 * (self.M + self.M.T))
        if eig[0] <= SYM_TOL * abs(eig[-1]) or eig[-1] <= 0:
            raise SingularMass(f"mass matrix is not positive definite (min eigenvalue {eig[0]:.3e})")
        return self

    def force(self, y, ydot) -> np.ndarray:
        """Nonlinear force ``f(y, y')``; batched over leading axis."""
        x = np.concatenate([np.atleast_2d(y), np.atleast_2d(ydot)], axis=1)
        out = self._force_map.eval_real(x)
        return out[0] if np.ndim(y) == 1 else out

    def residual(self, y, ydot, yddot) -> np.ndarray:
        """``M y'' + C y' + K y + f(y, y')``."""
        y, ydot, yddot = (np.atleast_2d(a) for a in (y, ydot, yddot))
        out = yddot @ self.M.T + ydot @ self.C.T + y @ self.K.T + self.force(y, ydot)
        return out[0] if out.shape[0] == 1 else out

    def acceleration(self, y, ydot) -> np.ndarray:
        rhs = -(np.atleast_2d(ydot) @ self.C.T + np.atleast_2d(y) @ self.K.T + self.force(
            np.atleast_2d(y), np.atleast_2d(ydot)))
        out = np.linalg.solve(self.M, rhs.T).T
        return out[0] if np.ndim(y) == 1 else out


@dataclass(frozen=True, eq=False)
class FirstOrderSystem:
    """``x' = A x + F(x)`` on ``R^{2n}``."""

    A: np.ndarray
    F: PolyMap
    source: MechanicalSystem | None = field(default=None, repr=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch("A must be square")
        if self.F.in_dim != A.shape[0] or self.F.out_dim != A.shape[0]:
            raise DimensionMismatch("F must map R^dim to R^dim")
        if 1 in self.F.orders:
            raise ConfigError("F must not contain linear terms")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        # real coefficient views for fast evaluation
        blocks = {}
        for order in self.F.orders:
            _, coeffs = self.F.block(order)
            rows = np.flatnonzero(np.any(coeffs != 0, axis=1))
            blocks[order] = (self.F.indices(order), coeffs.real[rows], rows)
        object.__setattr__(self, "_fast", blocks)
        # single padded monomial table (linear part included) for one state;
        # index ``dim`` points at an appended 1.0
        dim = A.shape[0]
        top = max(self.F.orders, default=1)
        tabs = [np.column_stack([np.arange(dim)] + [np.full(dim, dim)] * (top - 1))]
        mats = [A]
        for order, (idx, coeffs, rows) in blocks.items():
            used = np.flatnonzero(np.any(coeffs != 0, axis=0))
            pad = np.full((used.size, top - order), dim)
            tabs.append(np.hstack([idx[used], pad]))
            full = np.zeros((dim, used.size))
            full[rows] = coeffs[:, used]
            mats.append(full)
        table = np.vstack(tabs)
        cols = tuple(np.ascontiguousarray(table[:, k]) for k in range(top))
        object.__setattr__(self, "_flat", (cols, np.hstack(mats)))

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def nonlinear(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for idx, coeffs, rows in self._fast.values():
            mon = np.prod(x[..., idx], axis=-1)
            out[..., rows] += mon @ coeffs.T
        return out

    def rhs(self, t, x) -> np.ndarray:
        """Vector field, usable directly with ``scipy.integrate.solve_ivp``."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            cols, mat = self._flat
            xe = np.append(x, 1.0)
            mon = xe[cols[0]]
            for c in cols[1:]:
                mon = mon * xe[c]
            return mat @ mon
        return x @ self.A.T + self.nonlinear(x)

    def jac(self, t, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        J = self.A.copy()
        for idx, coeffs, rows in self._fast.values():
            factors = x[idx]
            order = idx.shape[1]
            dmon = np.zeros((idx.shape[0], self.dim))
            for k in range(order):
                others = np.prod(np.delete(factors, k, axis=1), axis=1)
                np.add.at(dmon, (np.arange(idx.shape[0]), idx[:, k]), others)
            J[rows] += coeffs @ dmon
        return J


def build_first_order(sys: MechanicalSystem) -> FirstOrderSystem:
    """Convert ``sys`` into ``x' = A x + F(x)`` with ``x = (y, y')``.

    Raises
    ------
    SingularMass, AsymmetryError
        If the matrices violate the model invariants.
    """
    sys.validate()
    n = sys.n
    Minv = np.linalg.inv(sys.M)
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    A[n:, :n] = -Minv @ sys.K
    A[n:, n:] = -Minv @ sys.C
    force = sys.nonlinearity.as_polymap()
    lift = np.zeros((2 * n, n))
    lift[n:] = -Minv
    F = force.scale_rows(lift)
    return FirstOrderSystem(A, F, source=sys)


def make_shaw_pierre(
    variant: str = "inner",
    *,
    k: float = 1.0,
    k1: float | None = None,
    k2: float | None = None,
    k3: float | None = None,
    c: float | None = None,
    kappa: float = 0.5,
    m: float = 1.0,
) -> MechanicalSystem:
    """Two masses on three springs with a cubic spring on the first mass.

    ``variant="inner"`` uses identical springs ``k``.  ``variant="outer"``
    takes ``k1, k2, k3`` (defaulting to ``k`` for ``k1, k3`` and ``4.005 k``
    for ``k2``), which places the second mode's eigenvalue close to
    ``3 lambda_1``.  The damping constant ``c`` defaults to 0.03 for the
    inner variant and 0.4 for the outer one.
    """
    if variant == "inner":
        k1 = k2 = k3 = k
    elif variant == "outer":
        k1 = k if k1 is None else k1
        k3 = k if k3 is None else k3
        k2 = 4.005 * k if k2 is None else k2
    else:
        raise ConfigError(f"unknown Shaw-Pierre variant {variant!r}")
    if c is None:
        c = 0.03 if variant == "inner" else 0.4
    for name, val in (("k1", k1), ("k2", k2), ("k3", k3), ("c", c), ("m", m)):
        if not val > 0:
            raise ConfigError(f"Shaw-Pierre parameter {name} must be positive, got {val}")
    if not kappa >= 0:
        raise ConfigError(f"kappa must be non-negative, got {kappa}")
    M = m * np.eye(2)
    K = np.array([[k1 + k2, -k2], [-k2, k2 + k3]], dtype=float)
    C = np.array([[2 * c, -c], [-c, 2 * c]], dtype=float)
    # kappa = 0 is the linear limit
    nl = PolynomialForce(2, (ForceTerm(0, kappa, (3, 0, 0, 0)),) if kappa else ())
    return MechanicalSystem(M, C, K, nl, name=f"shaw_pierre_{variant}")


def linear_force(n: int) -> PolynomialForce:
    return PolynomialForce(n)


def terms_from_records(n: int, records: Sequence[dict], one_based: bool = True) -> PolynomialForce:
    """Parse force terms from ``{"target_dof", "coefficient", "exponents"}`` records."""
    terms = []
    for rec in records:
        try:
            dof = int(rec["target_dof"]) - (1 if one_based else 0)
            terms.append(ForceTerm(dof, float(rec["coefficient"]), tuple(rec["exponents"])))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad nonlinear term {rec!r}: {exc}") from exc
    return PolynomialForce(n, tuple(terms))
