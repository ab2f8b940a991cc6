"""Exception hierarchy shared across the package."""


class InterpolationError(Exception):
    """Base class for every error raised by ratinterp."""


class InvalidProblem(InterpolationError, ValueError):
    """Interpolation data violates a structural requirement."""


class InfeasibleProblem(InterpolationError):
    """Pick matrix is not positive definite."""


class NonConvergent(InterpolationError):
    """A linear solve left a residual above tolerance."""


class SingularNormalization(InterpolationError):
    """W + I/2 is numerically singular."""


class PathSingular(InterpolationError):
    """I - lambda*T is numerically singular along the deformation path."""


class SingularL(InterpolationError):
    """The lower block of VN is singular (unequal observability indices)."""


class UnequalIndices(InterpolationError):
    """Operation requires all observability indices to be equal."""


class UnstableA(InterpolationError):
    """Denominator matrix polynomial is not Schur stable."""


class StepCollapse(InterpolationError):
    """Continuation step size dropped below its floor."""


class JacobianSingular(InterpolationError):
    """Newton corrector matrix is too ill-conditioned to trust."""


class InconsistentP(InterpolationError):
    """Terminal Lyapunov solution does not reproduce p = P H'."""


class NotPSD(InterpolationError):
    """P has a significantly negative eigenvalue."""


class Saturated(InterpolationError):
    """I - H P H' is not positive definite."""


class SingularBasis(InterpolationError):
    """[e V] is singular in the scalar construction."""


class RejectionExhausted(InterpolationError):
    """Random ground-truth generation gave up."""


class UnstableFactor(InterpolationError):
    """Spectral factor has a pole on or outside the unit circle."""


class InsufficientData(InterpolationError):
    """Too few samples for the requested number of lags."""
