"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit-specific failures."""


class NotPositiveDefinite(ToolkitError):
    """A matrix required to be positive definite is not."""


class ImaginaryAxisEigenvalue(ToolkitError):
    """An eigenvalue sits on (or too close to) the imaginary axis."""


class IllConditioned(ToolkitError):
    """A computation lost too many digits to be trusted."""


class SingularPairing(ToolkitError):
    """The boundary power-pairing block matrix is singular."""


class NotAdmissible(ToolkitError):
    """The observer Hamiltonian matrix has imaginary-axis eigenvalues."""


class NoPdSolution(ToolkitError):
    """The Riccati equation has no positive definite graph solution."""


class NotStabilizable(ToolkitError):
    """No stabilizing feedback could be extracted for the pair (A, B)."""


class NoAdmissibleAlpha(ToolkitError):
    """Every candidate dissipation level alpha was rejected."""


class CertificateFailure(ToolkitError):
    """No epsilon in the search schedule certifies strict positive realness."""


class SkewnessDefect(ToolkitError):
    """A matrix that must be skew-symmetric fails the tolerance."""


class SeparationMismatch(ToolkitError):
    """Closed-loop spectrum does not split into feedback + observer parts."""


class ValidationError(ToolkitError):
    """Invalid configuration or input data.

    Carries the dotted path of the offending field so command-line users can
    locate it in their config file.
    """

    def __init__(self, field, message):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")
