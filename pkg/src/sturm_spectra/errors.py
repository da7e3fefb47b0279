"""Exception hierarchy shared by all modules."""


class SturmSpectraError(Exception):
    """Base class for every error raised by the package."""


class InvalidOrderError(SturmSpectraError, ValueError):
    pass


class InvalidCoefficientError(SturmSpectraError, ValueError):
    pass


class DomainError(SturmSpectraError, ValueError):
    pass


class MeshError(SturmSpectraError, ValueError):
    pass


class InvalidProblemError(SturmSpectraError, ValueError):
    """Coefficient or boundary data violate the problem assumptions."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class MisuseError(SturmSpectraError, ValueError):
    pass


class UnknownVariantError(SturmSpectraError, ValueError):
    pass


class SolverError(SturmSpectraError, RuntimeError):
    pass


class SolverPathError(SolverError):
    """The requested eigensolver path cannot handle this pencil."""


class SizeError(SturmSpectraError, ValueError):
    pass


class NormalizationError(SturmSpectraError, ValueError):
    pass


class RefinementRequestError(SturmSpectraError, RuntimeError):
    """Root bracketing missed an eigenvalue; a finer grid is needed."""


class GridAlignmentError(SturmSpectraError, ValueError):
    pass


class ReferenceUnavailableError(SturmSpectraError, LookupError):
    pass


class ConfigError(SturmSpectraError, ValueError):
    """Malformed or invalid run configuration; carries a source position."""

    def __init__(self, message, line=None, column=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


class ExpressionError(ConfigError):
    pass
