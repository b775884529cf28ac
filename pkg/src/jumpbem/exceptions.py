"""Error types for jumpbem.

Every error carries the process exit code the CLI reports for it:
2 usage/configuration, 3 I/O, 4 numerical failure, 5 resource exhaustion.
"""

from typing import Optional

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4
EXIT_RESOURCE = 5


class JumpBEMError(Exception):
    """Base error."""

    def __init__(self, message: str, exit_code: int = EXIT_NUMERICAL):
        super().__init__(message)
        self.exit_code = exit_code


class ConfigurationError(JumpBEMError):
    """Invalid parameters or run configuration."""

    def __init__(self, message: str):
        super().__init__(message, EXIT_USAGE)


class MeshError(JumpBEMError):
    """Malformed, non-manifold or inconsistently oriented surface mesh."""

    def __init__(self, message: str, line: Optional[int] = None, exit_code: int = EXIT_USAGE):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, exit_code)
        self.line = line


class QuadratureError(JumpBEMError):
    """Unsupported rule request or degenerate integration domain."""

    def __init__(self, message: str):
        super().__init__(message, EXIT_USAGE)


class SpaceMismatchError(JumpBEMError):
    """A vector was paired with an operator of the wrong space role."""

    def __init__(self, message: str):
        super().__init__(message, EXIT_NUMERICAL)


class SingularSystemError(JumpBEMError):
    """A dense system is singular or too ill-conditioned to solve."""

    def __init__(self, message: str, rcond: Optional[float] = None):
        if rcond is not None:
            message = f"{message} (rcond={rcond:.3e})"
        super().__init__(message, EXIT_NUMERICAL)
        self.rcond = rcond


class GuardDistanceError(JumpBEMError):
    """An evaluation point lies closer to the surface than the guard distance."""

    def __init__(self, message: str, distance: Optional[float] = None):
        super().__init__(message, EXIT_NUMERICAL)
        self.distance = distance
