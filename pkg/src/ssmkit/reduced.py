"""Polar form of the reduced dynamics, amplitudes and backbone curves.

With ``z = (rho e^{i theta}, rho e^{-i theta})`` the resonant terms
``gamma_{a,b} z^a zbar^b`` with ``a = b + 1`` give

    rho'   = Re(lambda_1) rho + sum Re(gamma_{a,b}) rho^(a+b)
    theta' = Im(lambda_1)     + sum Im(gamma_{a,b}) rho^(a+b-1)
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .exceptions import BlowUp, EventNotReached, RealMasterPairUnsupported, StepFailure
from .solver import SSMExpansion

__all__ = [
    "PolarDynamics",
    "BackboneCurve",
    "ReducedTrajectory",
    "to_polar",
    "amplitude",
    "amplitude_diagnostics",
    "backbone",
    "integrate_reduced",
    "anchor_scale",
    "RTOL",
    "ATOL",
]

RTOL = 1e-8
ATOL = 1e-10
N_THETA = 128


@dataclass(frozen=True)
class PolarDynamics:
    """Real polynomials ``rho'(rho)`` and ``omega(rho)``.

    Attributes
    ----------
    rho_dot_coeffs : dict int -> float
        Power of ``rho`` to coefficient, including the linear ``Re lambda_1``.
    omega_coeffs : dict int -> float
        Power of ``rho`` to coefficient, including the constant ``Im lambda_1``.
    gammas : dict (a, b) -> complex
    """

    rho_dot_coeffs: dict[int, float]
    omega_coeffs: dict[int, float]
    gammas: dict[tuple[int, int], complex]

    def _poly(self, coeffs):
        top = max(coeffs, default=0)
        c = np.zeros(top + 1)
        for k, v in coeffs.items():
            c[k] = v
        return c

    @property
    def rho_dot_poly(self) -> np.ndarray:
        """Ascending power-series coefficients of ``rho'``."""
        return self._poly(self.rho_dot_coeffs)

    @property
    def omega_poly(self) -> np.ndarray:
        return self._poly(self.omega_coeffs)

    def rho_dot(self, rho):
        return P.polyval(np.asarray(rho, dtype=float), self.rho_dot_poly)

    def omega(self, rho):
        return P.polyval(np.asarray(rho, dtype=float), self.omega_poly)

    def truncate(self, order: int) -> "PolarDynamics":
        """Keep the terms generated at expansion orders up to ``order``."""
        g = {k: v for k, v in self.gammas.items() if sum(k) <= order}
        return _assemble(self.rho_dot_coeffs[1], self.omega_coeffs[0], g)


def _assemble(re_lam, im_lam, gammas):
    rho = {1: float(re_lam)}
    om = {0: float(im_lam)}
    for (a, b), g in sorted(gammas.items()):
        rho[a + b] = rho.get(a + b, 0.0) + float(g.real)
        om[a + b - 1] = om.get(a + b - 1, 0.0) + float(g.imag)
    return PolarDynamics(rho, om, dict(gammas))


def to_polar(ssm: SSMExpansion) -> PolarDynamics:
    """Polar reduced dynamics of an SSM on an underdamped master pair.

    Raises
    ------
    RealMasterPairUnsupported
        If the master eigenvalues are not a complex-conjugate pair.
    """
    ms = ssm.modal
    if not ms.underdamped:
        raise RealMasterPairUnsupported(
            f"master pair {ms.lambda_E} is not a complex conjugate pair"
        )
    lam = ms.lambda_E[0]
    gammas = {}
    for order in sorted(ssm.R_blocks):
        if order < 2:
            continue
        blk = ssm.R_blocks[order]
        for j in np.flatnonzero(blk[0] != 0):
            a, b = order - int(j), int(j)
            g = complex(blk[0, j])
            partner = blk[1, a]  # row 2 holds the conjugate at key (b, a)
            if abs(partner - np.conj(g)) > 1e-9 * max(abs(g), 1e-300):
                warnings.warn(f"R rows are not conjugate at key ({a},{b})", stacklevel=2)
            if a != b + 1:
                warnings.warn(
                    f"resonant key ({a},{b}) has a theta-dependent polar form and is left out",
                    stacklevel=2,
                )
                continue
            gammas[(a, b)] = g
    return _assemble(lam.real, lam.imag, gammas)


def _circle(rho, n_theta):
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    z1 = rho * np.exp(1j * theta)
    return theta, np.column_stack([z1, np.conj(z1)])


def amplitude(ssm: SSMExpansion, rho: float, n_theta: int = N_THETA) -> float:
    """Mean over ``theta`` of the Euclidean norm of the physical positions.

    Uses the composite trapezoid rule with ``n_theta`` uniform samples.  The
    norm has kinks where the positions pass near zero together, so the rule
    converges algebraically rather than spectrally in that case.
    """
    if rho < 0:
        raise ValueError("rho must be non-negative")
    if rho == 0:
        return 0.0
    _, z = _circle(rho, n_theta)
    x = ssm.physical(z)
    n = ssm.modal.n
    return float(np.mean(np.linalg.norm(x[:, :n], axis=1)))


def amplitude_diagnostics(ssm: SSMExpansion, rho: float, n_theta: int = N_THETA) -> dict:
    """Amplitude plus the largest displacement of each DOF over ``theta``."""
    _, z = _circle(rho, n_theta)
    x = ssm.physical(z)
    n = ssm.modal.n
    return {
        "rho": float(rho),
        "amplitude": float(np.mean(np.linalg.norm(x[:, :n], axis=1))),
        "max_displacement": np.abs(x[:, :n]).max(axis=0),
    }


def anchor_scale(
    ssm: SSMExpansion, dof: int, rho: float, displacement: float, n_theta: int = 256
) -> float:
    """Master-eigenvector scale that maps ``rho`` to a given peak displacement.

    Finds ``r`` with ``max_theta |x_dof(r, theta)| = displacement`` on the
    SSM of ``ssm`` and returns ``r / rho``.  Passing the result as
    ``master_scale`` to :func:`~ssmkit.spectral.decompose` makes amplitude
    ``rho`` reach that displacement.
    """
    if not (rho > 0 and displacement > 0):
        raise ValueError("rho and displacement must be positive")
    theta = 2 * np.pi * np.arange(n_theta) / n_theta

    def peak(r):
        z1 = r * np.exp(1j * theta)
        x = ssm.physical(np.column_stack([z1, np.conj(z1)]))
        return np.abs(x[:, dof]).max() - displacement

    lin = np.abs(ssm.modal.T[dof, 0]) * 2
    if lin == 0:
        raise ValueError(f"dof {dof} does not move in the master mode")
    lo = hi = displacement / lin
    for _ in range(60):
        if peak(lo) < 0:
            break
        lo *= 0.5
    for _ in range(60):
        if peak(hi) > 0:
            break
        hi *= 1.5
    return float(brentq(peak, lo, hi, xtol=1e-12, rtol=1e-12) / rho)


@dataclass(frozen=True)
class BackboneCurve:
    rho: np.ndarray
    omega: np.ndarray
    amplitude: np.ndarray

    @property
    def rho_max(self) -> float:
        return float(self.rho[-1]) if self.rho.size else 0.0

    @property
    def samples(self) -> list[dict]:
        return [
            {"rho": float(r), "omega": float(w), "amplitude": float(a)}
            for r, w, a in zip(self.rho, self.omega, self.amplitude)
        ]


def backbone(ssm: SSMExpansion, rho_grid, n_theta: int = N_THETA, polar=None) -> BackboneCurve:
    """Sample ``(rho, omega(rho), A(rho))`` along ``rho_grid``."""
    rho = np.atleast_1d(np.asarray(rho_grid, dtype=float))
    if rho.size > 1 and np.any(np.diff(rho) <= 0):
        raise ValueError("rho_grid must be strictly increasing")
    pd = to_polar(ssm) if polar is None else polar
    amp = np.array([amplitude(ssm, r, n_theta) for r in rho])
    return BackboneCurve(rho, pd.omega(rho), amp)


@dataclass(frozen=True)
class ReducedTrajectory:
    """Solution of the polar reduced dynamics.

    ``theta`` is stored in full; internally the phase is integrated relative
    to the linear rotation ``theta0 + omega0 t``.
    """

    t: np.ndarray
    rho: np.ndarray
    theta: np.ndarray
    t_end: float
    sol: object
    theta0: float = 0.0
    omega0: float = 0.0

    def __call__(self, t):
        y = self.sol(t)
        return y[0], self.theta0 + self.omega0 * np.asarray(t, dtype=float) + y[1]

    def z(self, t) -> np.ndarray:
        rho, theta = self(t)
        z1 = rho * np.exp(1j * theta)
        return np.column_stack([z1, np.conj(z1)])


def integrate_reduced(
    pd: PolarDynamics,
    rho0: float,
    theta0: float,
    *,
    t_end: float | None = None,
    rho_eps: float | None = None,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> ReducedTrajectory:
    """Integrate the polar reduced dynamics from ``(rho0, theta0)``.

    Stops at ``t_end`` or when ``rho`` first drops to ``rho_eps``.  Without
    ``t_end`` the search window is ten times the linear decay time
    ``ln(rho0 / rho_eps) / |Re lambda_1|``.  Steps are capped at one linear
    period so the dense output stays accurate between samples.

    Raises
    ------
    BlowUp
        If ``rho`` exceeds ``10 rho0``.
    EventNotReached
        If ``rho_eps`` is given but not reached in the window.
    """
    if not rho0 > 0:
        raise ValueError("rho0 must be positive")
    if t_end is None and rho_eps is None:
        raise ValueError("give t_end or rho_eps")
    if rho_eps is not None and not 0 < rho_eps < rho0:
        raise ValueError("rho_eps must lie in (0, rho0)")
    rd = pd.rho_dot_poly
    # phase relative to the linear rotation keeps the integrated state small,
    # so the relative tolerance does not scale with the growing angle
    omega0 = float(pd.omega_coeffs.get(0, 0.0))
    om = pd.omega_poly.copy()
    om[0] -= omega0
    decay = abs(pd.rho_dot_coeffs[1])

    def f(t, y):
        return [P.polyval(y[0], rd), P.polyval(y[0], om)]

    def blow(t, y):
        return y[0] - 10 * rho0

    blow.terminal = True
    events = [blow]
    if rho_eps is not None:
        def hit(t, y):
            return y[0] - rho_eps

        hit.terminal = True
        hit.direction = -1
        events.append(hit)
    # the lifted trajectory is sampled on the oscillation time scale, so the
    # dense output must not interpolate across many periods
    max_step = 2 * np.pi / abs(omega0) if omega0 else np.inf
    if t_end is None:
        t_end = 10 * np.log(rho0 / rho_eps) / decay if decay > 0 else 1e6
    sol = solve_ivp(
        f, (0.0, float(t_end)), [rho0, 0.0], method="DOP853", rtol=rtol, atol=atol,
        dense_output=True, events=events, max_step=max_step,
    )
    if sol.status == -1:
        raise StepFailure(sol.message)
    if sol.t_events[0].size:
        raise BlowUp(f"rho left the validity region (rho > {10 * rho0:g})")
    stop = float(sol.t[-1])
    if rho_eps is not None:
        if not sol.t_events[1].size:
            raise EventNotReached(f"rho did not reach {rho_eps:g} before t = {t_end:g}")
        stop = float(sol.t_events[1][0])
    theta = theta0 + omega0 * sol.t + sol.y[1]
    return ReducedTrajectory(sol.t, sol.y[0], theta, stop, sol.sol, float(theta0), omega0)
