"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A scenario, preset, or experiment configuration is inconsistent."""


class InfeasibleQuotaError(ConfigurationError):
    """A projection quota exceeds the number of supported coordinates."""


class DivergenceError(RuntimeError):
    """A solver iterate became non-finite or left the trust region.

    Carries the offending iteration index and, when available, the partial
    trajectory collected up to that point.
    """

    def __init__(self, message, iteration, trajectory=None):
        super().__init__(message)
        self.iteration = iteration
        self.trajectory = trajectory


class UnstableQueueError(ValueError):
    """Mean queue delay is undefined because the load is at or above one."""


class SingularRateError(ValueError):
    """A supported placement pair has zero service capacity."""


class OracleFailureError(RuntimeError):
    """A reference solver failed to converge; dependent checks must abort."""
