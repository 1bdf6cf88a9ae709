"""Accuracy checks for computed SSMs.

Two measures are provided.  :func:`invariance_error` compares trajectories
of the full system with their reduced counterparts lifted through ``W``.
:func:`invariance_residual` evaluates the defect of the invariance equation
``Lambda W + G(W) - DW R`` directly.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import ode, solve_ivp

from ._series import SeriesComposer, d_dz1, d_dz2, eval_blocks, hconv, jacobian_blocks
from .exceptions import BlowUp, ConfigError, StepFailure
from .model import FirstOrderSystem
from .poly import PolyMap
from .reduced import ATOL, RTOL, PolarDynamics, integrate_reduced, to_polar
from .solver import SSMExpansion

__all__ = [
    "FullTrajectory",
    "InvarianceResult",
    "integrate_full",
    "invariance_error",
    "invariance_residual",
    "residual_series",
    "loglog_slope",
    "is_stiff",
]

MIN_GRID = 500
SAMPLES_PER_PERIOD = 40


@dataclass(frozen=True)
class FullTrajectory:
    t: np.ndarray
    x: np.ndarray
    sol: object
    method: str

    def __call__(self, t) -> np.ndarray:
        """States at times ``t`` as an ``(len(t), dim)`` array.

        Without dense output only the stored times can be queried.
        """
        if self.sol is not None:
            return np.atleast_2d(self.sol(t).T)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        pos = np.clip(np.searchsorted(self.t, t), 0, self.t.size - 1)
        if not np.allclose(self.t[pos], t, rtol=0, atol=1e-12 * max(1.0, abs(self.t[-1]))):
            raise ValueError("trajectory has no dense output; query the stored times")
        return self.x[pos]


def is_stiff(fos: FirstOrderSystem, ratio: float = 1e3) -> bool:
    """Heuristic: the fastest mode is ``ratio`` times faster than the slowest."""
    lam = np.linalg.eigvals(fos.A)
    slow = np.min(np.abs(lam))
    return bool(np.max(np.abs(lam)) > ratio * max(slow, 1e-300))


def integrate_full(
    fos: FirstOrderSystem,
    x0,
    t_end: float,
    *,
    t_eval=None,
    method: str = "auto",
    rtol: float = RTOL,
    atol: float = ATOL,
) -> FullTrajectory:
    """Integrate ``x' = A x + F(x)`` on ``[0, t_end]`` with dense output.

    ``method="auto"`` uses the explicit DOP853 scheme unless the spectrum of
    ``A`` is stiff, in which case Radau with the exact Jacobian is used.

    With DOP853 and a ``t_eval`` grid the compiled DOP853 code behind
    :class:`scipy.integrate.ode` steps from grid point to grid point; the
    result then carries no dense output.  This is about twice as fast as
    ``solve_ivp`` for long runs with resolved fast modes.

    Raises
    ------
    StepFailure
        If the integrator cannot continue (step size underflow).
    BlowUp
        If the state becomes non-finite.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (fos.dim,) or not np.all(np.isfinite(x0)):
        raise ConfigError("x0 must be a finite state vector of the system dimension")
    if method == "auto":
        method = "Radau" if is_stiff(fos) else "DOP853"
    if method == "DOP853" and t_eval is not None:
        return _integrate_grid(fos, x0, np.asarray(t_eval, dtype=float), rtol, atol)
    kwargs = {"jac": fos.jac} if method in ("Radau", "BDF", "LSODA") else {}
    sol = solve_ivp(
        fos.rhs, (0.0, float(t_end)), x0, method=method, rtol=rtol, atol=atol,
        dense_output=True, t_eval=t_eval, **kwargs,
    )
    if sol.status == -1:
        raise StepFailure(sol.message)
    if not np.all(np.isfinite(sol.y)):
        raise BlowUp("full trajectory became non-finite")
    return FullTrajectory(sol.t, sol.y.T, sol.sol, method)


def _integrate_grid(fos, x0, t_eval, rtol, atol):
    if t_eval.ndim != 1 or t_eval.size == 0 or np.any(np.diff(t_eval) <= 0) or t_eval[0] < 0:
        raise ConfigError("t_eval must be strictly increasing and start at t >= 0")
    r = ode(fos.rhs).set_integrator("dop853", rtol=rtol, atol=atol, nsteps=2**31 - 1)
    r.set_initial_value(x0, 0.0)
    out = np.empty((t_eval.size, x0.size))
    for k, t in enumerate(t_eval):
        out[k] = x0 if t == 0.0 else r.integrate(t)
        if not r.successful():
            raise StepFailure(f"DOP853 stopped at t = {r.t:g} (code {r.get_return_code()})")
        if not np.all(np.isfinite(out[k])):
            raise BlowUp("full trajectory became non-finite")
    return FullTrajectory(t_eval.copy(), out, None, "DOP853")


@dataclass(frozen=True)
class InvarianceResult:
    order: int
    rho0: float
    rho_eps: float
    n_traj: int
    delta_inv: float
    per_trajectory: np.ndarray
    thetas: np.ndarray
    normalization: float
    coordinates: str


def _pair_distance(fos, ssm, pd, rho0, rho_eps, theta0, coordinates, method):
    traj = integrate_reduced(pd, rho0, theta0, rho_eps=rho_eps)
    t_stop = traj.t_end
    z0 = np.array([rho0 * np.exp(1j * theta0), rho0 * np.exp(-1j * theta0)])
    x0 = ssm.physical(z0)
    omega = abs(pd.omega(rho0))
    n_grid = max(MIN_GRID, int(np.ceil(SAMPLES_PER_PERIOD * t_stop * omega / (2 * np.pi))))
    t = np.linspace(0.0, t_stop, n_grid)
    full = integrate_full(fos, x0, t_stop, t_eval=t, method=method)
    x_full = full(t)
    zt = traj.z(t)
    if coordinates == "physical":
        x_red = ssm.physical(zt)
        ref = np.linalg.norm(x0)
    else:
        x_full = x_full @ ssm.modal.T_inv.T
        x_red = ssm.eval_W(zt)
        ref = np.linalg.norm(ssm.eval_W(z0))
    dist = float(np.max(np.linalg.norm(x_full - x_red, axis=1)))
    return dist, ref


def invariance_error(
    fos: FirstOrderSystem,
    ssm: SSMExpansion,
    rho0: float,
    rho_eps: float,
    N: int = 50,
    theta_seed: int | None = None,
    *,
    coordinates: str = "physical",
    method: str = "auto",
    workers: int = 1,
    polar: PolarDynamics | None = None,
) -> InvarianceResult:
    """Trajectory-based invariance error of an SSM.

    ``N`` trajectories start on the circle ``rho = rho0`` at angles
    ``2 pi k / N`` (jittered by up to half a spacing when ``theta_seed`` is
    given).  Each full trajectory is compared with the lifted reduced one
    until the reduced radius falls to ``rho_eps``; ``dist`` is the largest
    distance on a shared time grid.  The result is the mean ``dist`` divided
    by the largest launch-point norm.

    Parameters
    ----------
    coordinates : {"physical", "modal"}
        Compare states ``x`` or modal coordinates ``q = T^{-1} x``.
    workers : int
        Thread count for the independent trajectory pairs.
    """
    if not 0 < rho_eps < rho0:
        raise ConfigError("need 0 < rho_eps < rho0")
    if N < 1:
        raise ConfigError("need at least one trajectory")
    if coordinates not in ("physical", "modal"):
        raise ConfigError(f"unknown coordinates {coordinates!r}")
    pd = to_polar(ssm) if polar is None else polar
    thetas = 2 * np.pi * np.arange(N) / N
    if theta_seed is not None:
        rng = np.random.default_rng(theta_seed)
        thetas = thetas + rng.uniform(-0.5, 0.5, N) * (2 * np.pi / N)

    def run(th):
        return _pair_distance(fos, ssm, pd, rho0, rho_eps, th, coordinates, method)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, thetas))
    else:
        results = [run(th) for th in thetas]
    dists = np.array([r[0] for r in results])
    norm = max(r[1] for r in results)
    return InvarianceResult(
        ssm.order, float(rho0), float(rho_eps), int(N), float(dists.mean() / norm),
        dists, thetas, float(norm), coordinates,
    )


# ---------------------------------------------------------------------------
# invariance residual
# ---------------------------------------------------------------------------


def _abs_map(G: PolyMap) -> PolyMap:
    blocks = {}
    for i in G.orders:
        keys, coeffs = G.block(i)
        blocks[i] = (keys, np.abs(coeffs))
    return PolyMap(G.in_dim, G.out_dim, blocks)


def _residual_terms(G, W, R, lam, n_w, top, absolute=False):
    sign = 1.0 if absolute else -1.0
    comp = SeriesComposer(G)
    rows = W[1].shape[0]
    out = {}
    for i in range(1, top + 1):
        if i > 1:
            r = comp.compose(i)
        else:
            r = np.zeros((rows, 2), dtype=complex)
        if i in W:
            r = r + lam[:, None] * W[i]
        for m in range(1, min(i, n_w) + 1):
            k = i + 1 - m
            if k in R and np.any(R[k]):
                r = r + sign * (hconv(d_dz1(W[m]), R[k][0:1]) + hconv(d_dz2(W[m]), R[k][1:2]))
        out[i] = r
        comp.push(i, W.get(i, np.zeros((rows, i + 1), dtype=complex)))
    return out


def residual_series(ssm: SSMExpansion, rtol: float = 1e-10) -> dict[int, np.ndarray]:
    """Homogeneous parts of the invariance defect of ``ssm``.

    Degrees ``1..n_w`` vanish in exact arithmetic; their computed values are
    rounding noise.  Entries whose modulus is below ``rtol`` times the sum of
    the moduli of the contributing terms are set to zero, so that what is
    left is the truncation defect of degree above ``n_w``.  Entries above
    the threshold are kept and would reveal a solver error.
    """
    ms = ssm.modal
    n_w = ssm.order
    top = max(ms.G.max_order, 1) * n_w
    W, R = ssm.W_blocks, ssm.R_blocks
    res = _residual_terms(ms.G, W, R, ms.lambdas, n_w, top)
    absW = {i: np.abs(c) for i, c in W.items()}
    absR = {i: np.abs(c) for i, c in R.items()}
    scale = _residual_terms(_abs_map(ms.G), absW, absR, np.abs(ms.lambdas), n_w, n_w, True)
    for i in range(1, n_w + 1):
        s = np.abs(scale[i])
        noise = np.abs(res[i]) <= rtol * s
        res[i] = np.where(noise, 0, res[i])
    return res


def _pointwise(ssm, z):
    ms = ssm.modal
    q = eval_blocks(ssm.W_blocks, z)
    Gq = ms.G.eval(q)
    J = jacobian_blocks(ssm.W_blocks, z)
    Rz = eval_blocks(ssm.R_blocks, z)
    r = q * ms.lambdas[None, :] + Gq - np.einsum("nij,nj->ni", J, Rz)
    return np.linalg.norm(r, axis=1)


def invariance_residual(ssm: SSMExpansion, z_samples, mode: str = "series") -> np.ndarray:
    """Norm of ``Lambda W(z) + G(W(z)) - DW(z) R(z)`` at each sample.

    ``mode="pointwise"`` evaluates the three terms in floating point and is
    limited by cancellation to about ``eps |W(z)|``.  ``mode="series"``
    evaluates the defect polynomial from :func:`residual_series`, which
    resolves the true ``|z|^(n_w + 1)`` decay far below that floor.
    """
    z = np.atleast_2d(np.asarray(z_samples, dtype=complex))
    if mode == "pointwise":
        return _pointwise(ssm, z)
    if mode != "series":
        raise ConfigError(f"unknown residual mode {mode!r}")
    blocks = residual_series(ssm)
    return np.linalg.norm(eval_blocks(blocks, z), axis=1)


def loglog_slope(ssm: SSMExpansion, radii=None, n_theta: int = 8, mode: str = "series"):
    """Fitted slope of ``log ||r(z)||`` against ``log |z|``.

    Samples conjugate points ``(s e^{i t}, s e^{-i t})`` on ``n_theta``
    angles per radius and averages the residual norms.

    Returns
    -------
    slope : float
    radii, norms : ndarray
    """
    radii = np.logspace(-3, -1, 9) if radii is None else np.asarray(radii, dtype=float)
    theta = 2 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    norms = []
    for s in radii:
        z1 = s * np.exp(1j * theta)
        z = np.column_stack([z1, np.conj(z1)])
        norms.append(np.mean(invariance_residual(ssm, z, mode)))
    norms = np.array(norms)
    ok = norms > 0
    if ok.sum() < 2:
        return float("inf"), radii, norms
    zabs = np.sqrt(2) * radii
    slope = np.polyfit(np.log(zabs[ok]), np.log(norms[ok]), 1)[0]
    return float(slope), radii, norms
