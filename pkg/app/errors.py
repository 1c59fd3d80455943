"""Exception hierarchy shared by the library, the CLI and the HTTP routes.

Every error carries the process exit code the CLI should return. All of them
are also ``ValueError`` subclasses so plain ``except ValueError`` still works.
"""


class EnsconvError(ValueError):
    """Base class for all library errors"""

    exit_code = 1


class UsageError(EnsconvError):
    """Invalid combination of command-line or API arguments"""

    exit_code = 2


class ConfigError(EnsconvError):
    """Invalid estimator configuration (e.g. fewer than two replicates)"""

    exit_code = 2


class ParseError(EnsconvError):
    """Malformed input file"""

    exit_code = 3

    def __init__(self, message: str, path: str = None, line: int = None, column: int = None):
        location = ""
        if path is not None:
            location = str(path)
            if line is not None:
                location += f":{line}"
                if column is not None:
                    location += f":{column}"
            location += ": "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line = line
        self.column = column


class DimensionError(EnsconvError):
    """Arrays whose shapes do not line up"""

    exit_code = 3


class ModelSpecError(EnsconvError):
    """First-order model specification violating one or more invariants"""

    exit_code = 3

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid model spec: " + "; ".join(self.violations))


class DomainError(EnsconvError):
    """Numeric input outside the domain of an operation"""

    exit_code = 4


class EmptyClassError(DomainError):
    """Class-wise error requested for a class with no evaluation points"""


class InfeasibleMomentsError(DomainError):
    """Sample moments that no Beta distribution can match"""


class UnsupportedError(DomainError):
    """Operation not available for the given model"""


class ReplayMismatchError(DomainError):
    """Replayed run whose outputs differ from the recorded digests"""
