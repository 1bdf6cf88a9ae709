"""Estimator-style front end for the SSM pipeline.

:class:`SSMEstimator` chains modal decomposition, resonance scan, the
order-by-order solve and the polar reduction behind ``fit``.  After
fitting, ``transform`` maps polar coordinates ``(rho, theta)`` to physical
states and ``predict`` maps amplitudes ``rho`` to frequencies.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .exceptions import ConfigError
from .model import FirstOrderSystem, MechanicalSystem, build_first_order
from .reduced import N_THETA, anchor_scale, backbone, to_polar
from .solver import compute_ssm
from .spectral import decompose, resonance_scan, spectral_quotients

__all__ = ["SSMEstimator", "fit_pipeline"]


def fit_pipeline(fos, order, *, master="slowest", delta=0.05, master_scale=1.0, anchor=None):
    """Run decomposition, resonance scan and the SSM solve.

    ``anchor`` is an optional dict ``{"dof", "rho", "displacement"[, "order"]}``.
    When given, a first SSM (at ``anchor["order"]``, default ``order``) fixes
    the master-eigenvector scale so that amplitude ``rho`` moves ``dof`` by
    ``displacement`` at its peak; the final SSM is then computed with that
    scale and ``master_scale`` is ignored.

    Returns
    -------
    ssm : SSMExpansion
    scale : float
        The master-eigenvector scale actually used.
    """
    if anchor is not None:
        missing = {"dof", "rho", "displacement"} - set(anchor)
        if missing:
            raise ConfigError(f"anchor lacks {sorted(missing)}")
        a_order = int(anchor.get("order", order))
        ms0 = decompose(fos, master)
        ssm0 = compute_ssm(ms0, a_order, delta, resonance_scan(ms0, delta, max(a_order, 2)))
        master_scale = anchor_scale(
            ssm0, int(anchor["dof"]), float(anchor["rho"]), float(anchor["displacement"])
        )
    ms = decompose(fos, master, master_scale)
    report = resonance_scan(ms, delta, max(order, 2))
    ssm = compute_ssm(ms, order, delta, report)
    return ssm, float(master_scale)


class SSMEstimator(BaseEstimator, TransformerMixin):
    """Two-dimensional SSM of a mechanical system.

    Parameters
    ----------
    order : int
        Expansion order ``n_w``.
    master : "slowest", int or pair of int
        Master mode selector passed to :func:`~ssmkit.spectral.decompose`.
    delta : float
        Near-resonance threshold.
    master_scale : float
        Scale of the master eigenvectors.
    anchor : dict or None
        Amplitude calibration, see :func:`fit_pipeline`.
    n_theta : int
        Quadrature points for amplitudes.

    Attributes
    ----------
    ssm_ : SSMExpansion
    polar_ : PolarDynamics
    quotients_ : dict
    master_scale_ : float
    n_features_in_ : int
        Phase-space dimension of the fitted system.
    """

    def __init__(
        self, order=15, master="slowest", delta=0.05, master_scale=1.0, anchor=None,
        n_theta=N_THETA,
    ):
        self.order = order
        self.master = master
        self.delta = delta
        self.master_scale = master_scale
        self.anchor = anchor
        self.n_theta = n_theta

    def fit(self, X, y=None):
        """Compute the SSM of ``X``.

        Parameters
        ----------
        X : MechanicalSystem or FirstOrderSystem
        y : ignored
        """
        if isinstance(X, MechanicalSystem):
            fos = build_first_order(X)
        elif isinstance(X, FirstOrderSystem):
            fos = X
        else:
            raise TypeError("fit expects a MechanicalSystem or FirstOrderSystem")
        if int(self.order) < 1:
            raise ConfigError("order must be at least 1")
        ssm, scale = fit_pipeline(
            fos, int(self.order), master=self.master, delta=float(self.delta),
            master_scale=float(self.master_scale), anchor=self.anchor,
        )
        self.fos_ = fos
        self.ssm_ = ssm
        self.master_scale_ = scale
        self.quotients_ = spectral_quotients(ssm.modal)
        self.polar_ = to_polar(ssm) if ssm.modal.underdamped else None
        self.n_features_in_ = fos.dim
        return self

    def transform(self, X):
        """Physical states on the SSM at polar coordinates.

        Parameters
        ----------
        X : array-like, shape (n_samples, 2)
            Columns ``rho`` and ``theta``.

        Returns
        -------
        ndarray, shape (n_samples, 2n)
        """
        check_is_fitted(self, "ssm_")
        X = check_array(X, ensure_min_features=2)
        if X.shape[1] != 2:
            raise ValueError(f"expected columns (rho, theta), got {X.shape[1]} columns")
        z1 = X[:, 0] * np.exp(1j * X[:, 1])
        return self.ssm_.physical(np.column_stack([z1, np.conj(z1)]))

    def predict(self, X):
        """Backbone frequency ``omega(rho)`` for each amplitude in ``X``."""
        check_is_fitted(self, "ssm_")
        if self.polar_ is None:
            raise ConfigError("frequency prediction needs an underdamped master pair")
        rho = column_or_1d(check_array(np.reshape(X, (-1, 1))))
        return self.polar_.omega(rho)

    def backbone(self, rho_grid):
        check_is_fitted(self, "ssm_")
        return backbone(self.ssm_, rho_grid, int(self.n_theta), self.polar_)
