"""Exception types raised across the package."""


class SupminError(Exception):
    """Base class for all package-specific failures."""


class SingularHessian(SupminError):
    """Cost Hessian is numerically singular where strict convexity requires it positive."""


class GrowthViolation(SupminError):
    """Sampled growth witnesses exceed the declared growth constant."""

    def __init__(self, message, offenders=None):
        super().__init__(message)
        self.offenders = offenders or []


class NoConvergence(SupminError):
    """An iterative procedure exhausted its budget without meeting its tolerance."""


class LineSearchStall(SupminError):
    """Backtracking line search could not produce a decrease."""


class AsymmetricTensor(SupminError):
    """Coefficient tensor violates the required index symmetry."""


class StencilOutOfDomain(SupminError):
    """Grid too small for the finite-difference stencil."""


class DimensionMismatch(SupminError):
    """Field shape incompatible with the operator or grid."""


class LinearSolveFailure(SupminError):
    """Iterative linear solve exceeded its budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateEnergy(SupminError):
    """Energy level is (numerically) zero; the dual field is undefined."""


class DegenerateField(SupminError):
    """Dual field vanishes identically although the energy level is positive."""


class ConfigError(SupminError):
    """Invalid run configuration; message lists the offending keys."""


class VerificationFailure(SupminError):
    """Computed results violate a verification threshold."""
