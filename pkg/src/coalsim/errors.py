"""Exception types raised by the simulator."""


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ConfigurationError(ValueError):
    """A run or species configuration cannot be realised."""


class SolverError(RuntimeError):
    """The field solver failed to reach its residual tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class StepError(RuntimeError):
    """A particle left the finite range during a macro step."""

    def __init__(self, message: str, particle_id: int):
        super().__init__(message)
        self.particle_id = particle_id
