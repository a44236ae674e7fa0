"""Exception hierarchy for morse_transport.

Every error raised by the library derives from :class:`MorseTransportError`,
split into three families that the CLI maps onto distinct exit codes:
configuration problems, numerical-convergence problems, and breakdown of the
perturbative regime.
"""


class MorseTransportError(Exception):
    """Base class for all library errors."""


# --- configuration / precondition family -----------------------------------

class ConfigError(MorseTransportError):
    """Invalid configuration file, key, or value."""


class DomainError(MorseTransportError, ValueError):
    """Argument outside the documented domain of an operation."""


class MultiBoundStateError(DomainError):
    """Trap parameters support more than one bound state (N >= 1)."""


class NoBoundStateError(DomainError):
    """Trap parameters support no bound state (N <= 0)."""


class ZeroLambdaError(DomainError):
    """Lagrange multiplier must be nonzero."""


class ZeroAccelerationError(DomainError):
    """Initial trap acceleration must be nonzero to effect a transport."""


class DegenerateInputError(DomainError):
    """Operation undefined for the supplied (degenerate) input."""


class DegenerateParameterError(DomainError):
    """Special-function parameters hit a degenerate (integer) configuration."""


class PoleError(DomainError):
    """Gamma-type function evaluated at one of its poles."""


# --- numerical-convergence family -------------------------------------------

class NumericalError(MorseTransportError):
    """Base class for convergence and accuracy failures."""


class ConvergenceError(NumericalError):
    """Series did not meet its tolerance within the term budget."""


class NonConvergenceError(NumericalError):
    """Iterative solver exhausted its iteration budget."""


class ToleranceError(NumericalError):
    """Quadrature could not certify the requested error bound."""


class DivergenceError(NumericalError):
    """Least-squares iteration produced non-finite residuals."""


class FitDivergenceError(DivergenceError):
    """Kernel fit failed to converge."""


class SingularJacobianError(NumericalError):
    """Normal equations singular beyond what damping can rescue."""


class MultiplePoleError(NumericalError):
    """Root clustering below the separation tolerance; residues unreliable."""


class DegeneratePairError(NumericalError):
    """Exponent pair cancels exactly where no closed-form limit is available."""


class RealificationError(NumericalError):
    """A mathematically real quantity came out with too large an imaginary part."""


class StepSizeError(NumericalError):
    """ODE integrator could not meet its local error tolerance."""


# --- regime breakdown --------------------------------------------------------

class AcausalFitError(MorseTransportError):
    """Fitted kernel model has a non-decaying (acausal) component."""


class RegimeBreakdownError(MorseTransportError):
    """Second-order survival probability left [-0.05, 1.05]; expansion invalid."""
