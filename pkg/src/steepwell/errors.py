"""Exception hierarchy shared by all modules."""


class SteepWellError(Exception):
    """Base class for every error raised by the package."""


class GridMismatchError(SteepWellError, ValueError):
    """Field, mask or potential sampled on a different grid."""


class InvalidFieldError(SteepWellError, ValueError):
    """Non-finite values or wrong shape."""


class GeometryError(SteepWellError, ValueError):
    """Well layout violates disjointness or lies outside the box."""


class ConditionD5Error(SteepWellError, ValueError):
    """Lowest Dirichlet eigenvalue of -Laplacian + a0 on the wells is not positive."""


class NumericalError(SteepWellError, RuntimeError):
    """Iterative method did not converge; carries the last iterate residual."""

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = history if history is not None else []


class NotInAdmissibleSet(SteepWellError, ValueError):
    """The pair violates mu1 mu2 |u|_4^4 |v|_4^4 - beta^2 |u^2 v^2|_1^2 > 0."""


class DegenerateDiscriminant(NotInAdmissibleSet):
    """Discriminant positive but below the numerical floor 1e-12 * P * Q."""


class InitialNotAdmissible(NotInAdmissibleSet):
    """Initial data for the ground-state solve is outside the admissible set."""


class NonConvergence(NumericalError):
    """Energy descent hit max_iters before the residual tolerance."""


class SandwichViolation(SteepWellError, RuntimeError):
    """Converged ground energy falls outside [m_a,lam + m_b,lam, m_a + m_b]."""

    def __init__(self, message, energy, lower, upper):
        super().__init__(message)
        self.energy = energy
        self.lower = lower
        self.upper = upper


class CertificationFailed(SteepWellError, RuntimeError):
    """Converged penalized solution exceeds delta outside the selected wells."""

    def __init__(self, message, max_outside_a, max_outside_b, result=None):
        super().__init__(message)
        self.max_outside_a = max_outside_a
        self.max_outside_b = max_outside_b
        self.result = result


class ConfigError(SteepWellError, ValueError):
    """Malformed experiment configuration."""
