"""Exception types shared across the package."""


class FusumError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(FusumError):
    """Malformed input file. Carries best-effort line/offset context in the message."""


class ValidationError(FusumError):
    """Structurally well-formed input that violates a documented invariant."""


class ConfigError(FusumError):
    """Bad configuration: unknown option values, missing referenced files."""


class InfeasibleError(FusumError):
    """The selection problem admits no feasible solution."""


class SolverTimeout(FusumError):
    """Time limit hit before any feasible incumbent was found."""
