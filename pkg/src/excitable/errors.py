"""Exception hierarchy shared by the simulation, analysis and CLI layers."""


class ExcitableError(Exception):
    """Base class for all package errors."""


class ParameterError(ExcitableError, ValueError):
    """A model, synapse, train or detector parameter violates its invariant."""


class EquilibriumError(ExcitableError):
    """The rest state does not balance the vector field."""


class IntegrationError(ExcitableError):
    """The hybrid integrator failed (step underflow, non-finite state, step budget)."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message if t is None else f"{message} at t={t:.9g} ms")
        self.t = t


class EstimationError(ExcitableError):
    """Contraction constants could not be estimated from the sampled pairs."""


class ConfigError(ExcitableError):
    """Invalid experiment configuration.

    ``line`` is the 1-based line of the offending key when it can be located.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
