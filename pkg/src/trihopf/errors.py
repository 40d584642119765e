"""Exception types shared across the package."""


class DomainError(ValueError):
    """State outside the vector field's domain (an interaction denominator vanishes)."""


class ConstraintViolationError(ValueError):
    """Parameter constraints required by the degenerate-Hopf setup are violated."""


class SingularTransformError(ValueError):
    """The normal-form change of variables is numerically singular."""


class ReparametrizationError(RuntimeError):
    """The angular rate is too small to use the angle as independent variable."""


class ExtractionError(RuntimeError):
    """Polynomial extrapolation of the slow-dynamics coefficients is ill conditioned."""


class QuadratureError(RuntimeError):
    """Period-average quadrature failed to converge within the doubling budget."""


class NewtonError(RuntimeError):
    """Damped Newton iteration failed to converge from a given seed."""


class NonConvergenceError(RuntimeError):
    """Fixed-point refinement on the Poincare section failed to converge."""


class DegenerateJacobianError(RuntimeError):
    """Averaged-field Jacobian is singular at a zero; stability transfer does not apply."""


class IntegrationError(RuntimeError):
    """Adaptive ODE integration failed (minimum step reached or state left R^3)."""


class NoReturnError(RuntimeError):
    """Trajectory left the bounding box or never recrossed the section."""


class TrivialMultiplierError(RuntimeError):
    """No monodromy eigenvalue close to 1: the reference orbit is not periodic."""
