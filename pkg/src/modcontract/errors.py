"""Exception types raised across the package."""


class ModContractError(Exception):
    """Base class for all errors raised by modcontract."""


class DimMismatch(ModContractError, ValueError):
    pass


class ComplexSpectrum(ModContractError, ValueError):
    """Matrix has eigenvalues with a non-negligible imaginary part."""


class Defective(ModContractError, ValueError):
    """Eigenvector matrix is numerically singular."""


class Singular(ModContractError, ValueError):
    pass


class SingularInputMap(ModContractError, ValueError):
    """``T_y @ df/du`` cannot be factored into a triangular input gain."""


class Diverged(ModContractError, ArithmeticError):
    """A simulated state left the configured norm bound."""

    def __init__(self, message, t=None, partial=None):
        super().__init__(message)
        self.t = t
        self.partial = partial


class NegativeDiscriminant(ModContractError, ValueError):
    pass


class MixedKp(ModContractError, ValueError):
    """Some but not all proportional gains are zero."""


class UnstableOpenLoop(ModContractError, ValueError):
    """Open-loop eigenvalue is not strictly negative; sign-only rules do not apply."""


class ConfigError(ModContractError, ValueError):
    pass
