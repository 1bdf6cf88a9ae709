"""Spectral submanifolds of nonlinear mechanical systems.

The pipeline runs from a :class:`~ssmkit.model.MechanicalSystem` through
:func:`~ssmkit.spectral.decompose` and :func:`~ssmkit.solver.compute_ssm`
to the polar reduced dynamics in :mod:`ssmkit.reduced`, with accuracy
checks in :mod:`ssmkit.validation`.
"""

from importlib.metadata import PackageNotFoundError, version

from .beam import BeamParams, assemble_beam
from .estimator import SSMEstimator
from .exceptions import SSMError
from .model import MechanicalSystem, build_first_order, make_shaw_pierre
from .reduced import backbone, to_polar
from .solver import compute_ssm
from .spectral import decompose, resonance_scan
from .validation import invariance_error, invariance_residual

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = [
    "BeamParams",
    "MechanicalSystem",
    "SSMError",
    "SSMEstimator",
    "assemble_beam",
    "backbone",
    "build_first_order",
    "compute_ssm",
    "decompose",
    "invariance_error",
    "invariance_residual",
    "make_shaw_pierre",
    "resonance_scan",
    "to_polar",
]
