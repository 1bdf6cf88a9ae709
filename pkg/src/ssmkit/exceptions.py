"""Exception hierarchy for ssmkit.

Each class carries the CLI exit code it maps to, so the command-line front
end can translate failures without a lookup table of its own.
"""


class SSMError(Exception):
    """Base class for all ssmkit errors."""

    exit_code = 1


class ConfigError(SSMError, ValueError):
    exit_code = 2


class SingularMass(SSMError, ValueError):
    exit_code = 2


class AsymmetryError(SSMError, ValueError):
    exit_code = 2


class DimensionMismatch(SSMError, ValueError):
    exit_code = 2


class SingularTransform(SSMError, ValueError):
    exit_code = 3


class UnstableSpectrum(SSMError):
    exit_code = 3


class DefectiveMatrix(SSMError):
    exit_code = 3


class RealMasterPairUnsupported(SSMError):
    exit_code = 3


class MissingLowerOrder(SSMError):
    exit_code = 4


class OuterResonanceBreakdown(SSMError):
    """Raised when an exact outer resonance makes a cohomological equation singular.

    Attributes
    ----------
    a, b : int
        Exponents of the resonant monomial ``z1**a * z2**b``.
    lam : complex
        The eigenvalue outside the master pair that is hit.
    index : int
        Position of ``lam`` in the modal ordering (0-based).
    label : str
        Mode-pair name of ``lam``: ``lambda_k`` for the upper eigenvalue of
        the ``k``-th pair (master pair first), ``conj(lambda_k)`` for its
        partner.
    """

    exit_code = 4

    def __init__(self, a, b, lam, index, order, label=None):
        self.a, self.b, self.lam, self.index, self.order = a, b, lam, index, order
        self.label = label or f"lambda_{index + 1}"
        super().__init__(
            f"outer resonance at order {order}: ({a},{b}) hits {self.label} = "
            f"{lam.real:.6g}{lam.imag:+.6g}i (position {index + 1})"
        )


class IntegrationError(SSMError):
    exit_code = 5


class StepFailure(IntegrationError):
    pass


class BlowUp(IntegrationError):
    pass


class EventNotReached(IntegrationError):
    pass


class NonNegligibleImaginaryPart(SSMError):
    exit_code = 5
