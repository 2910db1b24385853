"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class CapacityError(RuntimeError):
    """A dense or exact computation was requested beyond its size limit."""


class EmptyEnsembleError(RuntimeError):
    """No n-particle state falls inside the requested energy window."""


class InfeasibleEnergyError(ValueError):
    """Target mean energy lies outside the open range of the energy function."""


class DegenerateModelError(ValueError):
    """The energy function is constant, so no temperature can be fitted."""


class EquivarianceError(RuntimeError):
    """A kernel failed the permutation-equivariance contract."""


class IntegrationError(RuntimeError):
    """The ODE integrator left the probability simplex; reduce the step size."""


class ConfigError(ValueError):
    """An experiment configuration file or flag set could not be validated."""
