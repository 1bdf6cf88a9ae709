"""Finite elements for a geometrically nonlinear viscoelastic Timoshenko cantilever.

Kinematics ``u_x = u0(x) + z phi(x)``, ``u_z = w(x)`` with the strains

    eps0 = u0' + w'^2 / 2      eps1 = phi'
    gam0 = phi + w' + phi u0'  gam1 = phi phi'

and Kelvin-Voigt stresses ``E eps + eta eps_dot``, ``G gam + mu gam_dot``.
The internal virtual work ``int N0 d(eps0) + N1 d(eps1) + Q0 d(gam0) +
Q1 d(gam1) dx`` is discretized with cubic Hermite ``u0``, quadratic
three-node ``w`` and linear ``phi``.  Terms linear in the state give
``K`` and ``C``; the rest is returned as a polynomial force in ``(y, y')``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError
from .model import ForceTerm, MechanicalSystem, PolynomialForce

__all__ = ["BeamParams", "BeamAssembly", "assemble_beam", "spectral_ratio_report"]

FULL_GAUSS = 4
N_LOCAL = 9  # u0, u0' at both ends; w at three nodes; phi at both ends


@dataclass(frozen=True)
class BeamParams:
    """Geometry and material of the beam (mm, kg, s; moduli as printed in MPa).

    Defaults reproduce the three-element reference beam.
    """

    L: float = 1000.0
    h: float = 100.0
    b: float = 100.0
    rho_density: float = 7850e-9
    E: float = 90000.0
    G_shear: float = 34600.0
    eta: float = 33.6
    mu: float = 20.9
    lambda_ext: float = 0.0
    m_elems: int = 3
    # Gauss points for the membrane/shear terms; 3 gives the reduced rule
    membrane_shear_gauss: int = FULL_GAUSS

    def __post_init__(self):
        for name in ("L", "h", "b", "rho_density", "E", "G_shear"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"beam parameter {name} must be positive")
        for name in ("eta", "mu", "lambda_ext"):
            if getattr(self, name) < 0:
                raise ConfigError(f"beam parameter {name} must be non-negative")
        if int(self.m_elems) != self.m_elems or self.m_elems < 1:
            raise ConfigError("m_elems must be a positive integer")
        if self.membrane_shear_gauss not in (3, 4, 5):
            raise ConfigError("membrane_shear_gauss must be 3, 4 or 5")

    @property
    def I0(self) -> float:
        return self.b * self.h

    @property
    def I2(self) -> float:
        return self.b * self.h**3 / 12.0


@dataclass(frozen=True, eq=False)
class BeamAssembly:
    """Assembled beam model.

    Attributes
    ----------
    sys : MechanicalSystem
        ``n = 5 m + 1`` degrees of freedom ordered ``(u0 dofs, w dofs, phi dofs)``.
    dof_map : dict
        ``(field, node, slot) -> global index`` with ``field`` one of
        ``"u0", "w", "phi"``; ``slot`` is 0 for values and 1 for the ``u0``
        slope.  ``w`` nodes count element mid-points.
    """

    sys: MechanicalSystem
    dof_map: dict
    params: BeamParams
    I0: float
    I2: float
    m0: float
    m2: float
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.sys.n

    @property
    def tip_w(self) -> int:
        """Global index of the transverse displacement at the free end."""
        return self.dof_map[("w", 2 * self.params.m_elems, 0)]


# ---------------------------------------------------------------------------
# shape functions on one element, s = x / le in [0, 1]
# ---------------------------------------------------------------------------


def _shape(s, le):
    """Values and x-derivatives of the local shape functions.

    Returns dicts of 9-vectors ``{"u", "du", "w", "dw", "phi", "dphi"}``.
    """
    Nu = np.zeros(N_LOCAL)
    dNu = np.zeros(N_LOCAL)
    Nu[0:4] = [1 - 3 * s**2 + 2 * s**3, le * (s - 2 * s**2 + s**3), 3 * s**2 - 2 * s**3, le * (s**3 - s**2)]
    dNu[0:4] = [(-6 * s + 6 * s**2) / le, 1 - 4 * s + 3 * s**2, (6 * s - 6 * s**2) / le, 3 * s**2 - 2 * s]
    Nw = np.zeros(N_LOCAL)
    dNw = np.zeros(N_LOCAL)
    Nw[4:7] = [(1 - s) * (1 - 2 * s), 4 * s * (1 - s), s * (2 * s - 1)]
    dNw[4:7] = [(4 * s - 3) / le, (4 - 8 * s) / le, (4 * s - 1) / le]
    Np = np.zeros(N_LOCAL)
    dNp = np.zeros(N_LOCAL)
    Np[7:9] = [1 - s, s]
    dNp[7:9] = [-1 / le, 1 / le]
    return {"u": Nu, "du": dNu, "w": Nw, "dw": dNw, "phi": Np, "dphi": dNp}


# ---------------------------------------------------------------------------
# small dense polynomial algebra over the 2 * N_LOCAL local variables (q, qdot)
# scalar polys: {degree: tensor (2N,)*degree}; vector polys add a leading row axis
# ---------------------------------------------------------------------------


def _lin(vec, rate=False):
    full = np.zeros(2 * N_LOCAL)
    full[N_LOCAL * rate : N_LOCAL * (rate + 1)] = vec
    return {1: full}


def _padd(*polys):
    out = {}
    for p in polys:
        for k, v in p.items():
            out[k] = out[k] + v if k in out else v
    return out


def _pscale(p, c):
    return {k: c * v for k, v in p.items()}


def _pmul(p, q):
    out = {}
    for i, a in p.items():
        for j, b in q.items():
            t = np.multiply.outer(a, b)
            out[i + j] = out[i + j] + t if i + j in out else t
    return out


def _vmul(s, v):
    """Scalar poly ``s`` times vector poly ``v`` (row axis stays first)."""
    out = {}
    for i, a in s.items():
        for j, b in v.items():
            t = np.multiply.outer(b, a)
            out[i + j] = out[i + j] + t if i + j in out else t
    return out


def _vconst(vec):
    return {0: np.asarray(vec, dtype=float)}


def _vlin(scalar_lin, vec):
    # (scalar linear form) * vec as a vector poly of degree 1
    return {1: np.multiply.outer(vec, scalar_lin[1])}


def _element_force(p: BeamParams, le: float):
    """Internal force of one element as a vector poly in local ``(q, qdot)``."""
    I0, I2 = p.I0, p.I2
    total = {}
    rules = (
        ("bending", np.polynomial.legendre.leggauss(FULL_GAUSS)),
        ("membrane_shear", np.polynomial.legendre.leggauss(int(p.membrane_shear_gauss))),
    )
    for rule, (xs, ws) in rules:
        for xi, wt in zip(xs, ws):
            s = 0.5 * (xi + 1)
            N = _shape(s, le)
            wJ = wt * le / 2
            a, b, c, e = N["du"], N["dw"], N["dphi"], N["phi"]
            d = e + b
            A, B, Cf, D, Ef = (_lin(v) for v in (a, b, c, d, e))
            Ad, Bd, Cd, Dd, Ed = (_lin(v, True) for v in (a, b, c, d, e))
            if rule == "bending":
                # bending: N1 = I2 (E eps1 + eta eps1_dot), d(eps1) = c
                N1 = _pscale(_padd(_pscale(Cf, p.E), _pscale(Cd, p.eta)), I2)
                term = _vmul(N1, _vconst(c))
                # Q1 = I2 (G gam1 + mu gam1_dot), gam1 = (e.q)(c.q)
                gam1 = _pmul(Ef, Cf)
                gam1_dot = _padd(_pmul(Ed, Cf), _pmul(Ef, Cd))
                Q1 = _pscale(_padd(_pscale(gam1, p.G_shear), _pscale(gam1_dot, p.mu)), I2)
                dgam1 = _padd(_vlin(Cf, e), _vlin(Ef, c))
                term = _padd(term, _vmul(Q1, dgam1))
            else:
                # membrane: N0 = I0 (E eps0 + eta eps0_dot)
                eps0 = _padd(A, _pscale(_pmul(B, B), 0.5))
                eps0_dot = _padd(Ad, _pmul(Bd, B))
                N0 = _pscale(_padd(_pscale(eps0, p.E), _pscale(eps0_dot, p.eta)), I0)
                deps0 = _padd(_vconst(a), _vlin(B, b))
                term = _vmul(N0, deps0)
                # shear: Q0 = I0 (G gam0 + mu gam0_dot), gam0 = d.q + (e.q)(a.q)
                gam0 = _padd(D, _pmul(Ef, A))
                gam0_dot = _padd(Dd, _pmul(Ed, A), _pmul(Ef, Ad))
                Q0 = _pscale(_padd(_pscale(gam0, p.G_shear), _pscale(gam0_dot, p.mu)), I0)
                dgam0 = _padd(_vconst(d), _vlin(Ef, a), _vlin(A, e))
                term = _padd(term, _vmul(Q0, dgam0))
            total = _padd(total, _pscale(term, wJ))
    return total


def _element_mass(p: BeamParams, le: float):
    m0 = p.rho_density * p.I0
    m2 = p.rho_density * p.I2
    Me = np.zeros((N_LOCAL, N_LOCAL))
    xs, ws = np.polynomial.legendre.leggauss(FULL_GAUSS)
    for xi, wt in zip(xs, ws):
        N = _shape(0.5 * (xi + 1), le)
        wJ = wt * le / 2
        Me += wJ * (m0 * np.outer(N["u"], N["u"]) + m0 * np.outer(N["w"], N["w"])
                    + m2 * np.outer(N["phi"], N["phi"]))
    return Me


def _dof_layout(m: int):
    """Global indices before and after clamping the end ``x = 0``."""
    dof_map = {}
    idx = 0
    for node in range(m + 1):
        for slot in (0, 1):
            if node == 0 and slot == 0:
                continue
            dof_map[("u0", node, slot)] = idx
            idx += 1
    for node in range(1, 2 * m + 1):
        dof_map[("w", node, 0)] = idx
        idx += 1
    for node in range(1, m + 1):
        dof_map[("phi", node, 0)] = idx
        idx += 1
    return dof_map, idx


def _local_to_global(e: int, dof_map):
    keys = [
        ("u0", e, 0), ("u0", e, 1), ("u0", e + 1, 0), ("u0", e + 1, 1),
        ("w", 2 * e, 0), ("w", 2 * e + 1, 0), ("w", 2 * e + 2, 0),
        ("phi", e, 0), ("phi", e + 1, 0),
    ]
    return np.array([dof_map.get(k, -1) for k in keys])


def assemble_beam(p: BeamParams | None = None, **overrides) -> BeamAssembly:
    """Assemble ``M, C, K`` and the polynomial force of the clamped beam.

    Keyword arguments override fields of ``p`` (or of the default
    :class:`BeamParams`).
    """
    if p is None:
        p = BeamParams(**overrides)
    elif overrides:
        p = BeamParams(**{**p.__dict__, **overrides})
    m = int(p.m_elems)
    le = p.L / m
    dof_map, n = _dof_layout(m)
    assert n == 5 * m + 1

    M = np.zeros((n, n))
    K = np.zeros((n, n))
    C = np.zeros((n, n))
    nonlinear = defaultdict(float)  # (row, sorted global var tuple) -> coefficient

    f_el = _element_force(p, le)
    M_el = _element_mass(p, le)
    for e in range(m):
        g = _local_to_global(e, dof_map)
        keep = g >= 0
        gl, gk = g[keep], np.flatnonzero(keep)
        M[np.ix_(gl, gl)] += M_el[np.ix_(gk, gk)]
        lin = f_el[1]
        K[np.ix_(gl, gl)] += lin[np.ix_(gk, gk)]
        C[np.ix_(gl, gl)] += lin[np.ix_(gk, gk + N_LOCAL)]
        gvar = np.concatenate([g, np.where(g >= 0, g + n, -1)])
        for deg in (2, 3):
            if deg not in f_el:
                continue
            tens = f_el[deg]
            nz = np.argwhere(np.abs(tens) > 0)
            for entry in nz:
                row = g[entry[0]]
                vars_ = gvar[entry[1:]]
                if row < 0 or np.any(vars_ < 0):
                    continue
                nonlinear[(int(row), tuple(sorted(int(v) for v in vars_)))] += tens[tuple(entry)]

    if p.lambda_ext > 0:
        C += (p.lambda_ext / (p.rho_density * p.I0)) * M
    # symmetrize away rounding in the assembled matrices
    M = 0.5 * (M + M.T)
    K = 0.5 * (K + K.T)
    C = 0.5 * (C + C.T)

    terms = []
    scale = max((abs(v) for v in nonlinear.values()), default=0.0)
    for (row, vars_), coef in sorted(nonlinear.items()):
        if abs(coef) <= 1e-15 * scale:
            continue
        exps = np.bincount(np.array(vars_), minlength=2 * n)
        terms.append(ForceTerm(row, float(coef), tuple(int(x) for x in exps)))
    sys = MechanicalSystem(M, C, K, PolynomialForce(n, tuple(terms)), name="timoshenko_beam")
    return BeamAssembly(
        sys, dof_map, p, p.I0, p.I2, p.rho_density * p.I0, p.rho_density * p.I2,
        {"element_length": le},
    )


def spectral_ratio_report(asm: BeamAssembly) -> float:
    """``Re lambda`` of the second-slowest pair over that of the slowest pair."""
    from .model import build_first_order
    from .spectral import _sorted_eig, mode_pairs

    fos = build_first_order(asm.sys)
    lam, _ = _sorted_eig(fos.A)
    pairs = mode_pairs(lam)
    if len(pairs) < 2:
        raise ConfigError("need at least two mode pairs")
    return float(lam[pairs[1][0]].real / lam[pairs[0][0]].real)
