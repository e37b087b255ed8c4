"""Exception hierarchy shared by every module."""


class DalGameError(Exception):
    """Base class for library errors."""


class NonFiniteValue(DalGameError, ArithmeticError):
    """A cost, gradient or iterate evaluated to NaN or infinity."""

    def __init__(self, message, player=None):
        super().__init__(message)
        self.player = player


class PartitionMismatch(DalGameError, ValueError):
    """Joint parameters do not match the game's player structure."""


class UnsupportedGame(DalGameError, TypeError):
    """The requested operation needs structure the game does not expose."""


class SingularBlock(DalGameError, ValueError):
    """A per-player block Hessian is not positive definite."""


class AsymmetricInput(DalGameError, ValueError):
    """A matrix expected to be symmetric is not (within tolerance)."""


class ConvergenceFailure(DalGameError, RuntimeError):
    """An eigensolver or other iterative routine failed to converge."""


class NotHurwitz(DalGameError, ValueError):
    """A spectrum contains an eigenvalue with non-negative real part."""


class UnsupportedMethod(DalGameError, ValueError):
    """The integrator has no exact linear amplification map."""


class AccuracyContractViolation(DalGameError, RuntimeError):
    """A numerical routine could not meet its stated accuracy."""


class ConfigError(DalGameError, ValueError):
    """An experiment configuration is invalid."""


class SchemaError(DalGameError, ValueError):
    """A CSV file does not carry the expected schema header."""
